//! Source arbitration for odometry and race flags.

use serde::{Deserialize, Serialize};

use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimDuration, SimTime};
use crate::comm::{FlagOrigin, RaceFlag};
use crate::localization::{LocalPose, PoseSource};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MuxConfig {
    /// EKF scalar covariance ceiling, m^2 (0.35 m squared).
    pub cov_threshold: f64,
    /// Consecutive good EKF messages needed to fall back to the EKF.
    pub required_streak: u32,
    pub ekf_fresh_ms: u64,
    pub gnss_fresh_ms: u64,
    /// MyLaps flags older than this give way to spoofed flags.
    pub flag_fresh_ms: u64,
}

impl Default for MuxConfig {
    fn default() -> Self {
        MuxConfig {
            cov_threshold: 0.1225,
            required_streak: 20,
            ekf_fresh_ms: 100,
            gnss_fresh_ms: 200,
            flag_fresh_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuxState {
    /// `None` while nothing usable is available.
    pub source: Option<PoseSource>,
    pub streak: u32,
    pub cfg: MuxConfig,
}

impl MuxState {
    /// Starts on the EKF.
    pub fn new(cfg: MuxConfig) -> Self {
        MuxState {
            source: Some(PoseSource::Ekf),
            streak: 0,
            cfg,
        }
    }

    /// Counts consecutive good EKF messages; any bad one resets the count.
    pub fn observe_ekf(&mut self, pose: &LocalPose) {
        if pose.scalar_cov <= self.cfg.cov_threshold {
            self.streak = self.streak.saturating_add(1);
        } else {
            self.streak = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuxOutput {
    Pose(LocalPose),
    NoOdometry,
}

/// Picks the odometry source. The EKF wins while it is fresh and under the
/// covariance ceiling, but after a fallback it must first produce the
/// required streak of good messages. Otherwise the fresh GNSS pose with the
/// smaller covariance wins (top on ties), and with nothing fresh the result
/// is [`MuxOutput::NoOdometry`].
pub fn mux_select(
    state: &MuxState,
    ekf: Option<&LocalPose>,
    top: Option<&LocalPose>,
    bottom: Option<&LocalPose>,
    now: SimTime,
) -> (MuxOutput, MuxState) {
    let cfg = &state.cfg;
    let fresh = |p: &LocalPose, ms: u64| now.since(p.stamp) <= SimDuration::from_millis(ms);
    let mut next = *state;

    if let Some(e) = ekf {
        let good = fresh(e, cfg.ekf_fresh_ms) && e.scalar_cov <= cfg.cov_threshold;
        let allowed = state.source == Some(PoseSource::Ekf) || state.streak >= cfg.required_streak;
        if good && allowed {
            next.source = Some(PoseSource::Ekf);
            return (MuxOutput::Pose(*e), next);
        }
    }
    let gnss = [top, bottom]
        .into_iter()
        .flatten()
        .filter(|p| fresh(p, cfg.gnss_fresh_ms))
        .fold(None::<&LocalPose>, |best, p| match best {
            Some(b) if b.scalar_cov <= p.scalar_cov => Some(b),
            _ => Some(p),
        });
    match gnss {
        Some(p) => {
            next.source = Some(p.source);
            (MuxOutput::Pose(*p), next)
        }
        None => {
            next.source = None;
            (MuxOutput::NoOdometry, next)
        }
    }
}

fn source_name(s: Option<PoseSource>) -> &'static str {
    s.map_or("none", PoseSource::as_str)
}

/// Shared arbitration logic, used by the multiplexer itself and by the node
/// health monitor when it takes the multiplexer's place.
#[derive(Debug, Clone)]
pub(crate) struct MuxCore {
    pub state: MuxState,
    ekf: Option<LocalPose>,
    top: Option<LocalPose>,
    bottom: Option<LocalPose>,
    mylaps_last: Option<SimTime>,
}

impl MuxCore {
    pub fn new(cfg: MuxConfig, start_on_ekf: bool) -> Self {
        let mut state = MuxState::new(cfg);
        if !start_on_ekf {
            state.source = None;
        }
        MuxCore {
            state,
            ekf: None,
            top: None,
            bottom: None,
            mylaps_last: None,
        }
    }

    fn select(&mut self, ctx: &mut NodeContext<'_>) -> MuxOutput {
        let (out, next) = mux_select(&self.state, self.ekf.as_ref(), self.top.as_ref(), self.bottom.as_ref(), ctx.now);
        if next.source != self.state.source {
            let cov = match out {
                MuxOutput::Pose(p) => format!("{:.6}", p.scalar_cov),
                MuxOutput::NoOdometry => "none".to_string(),
            };
            let ekf_cov = self.ekf.map_or("none".to_string(), |e| format!("{:.6}", e.scalar_cov));
            ctx.halo(
                "mux_switch",
                format!(
                    "from={} to={} cov={cov} ekf_cov={ekf_cov}",
                    source_name(self.state.source),
                    source_name(next.source)
                ),
            );
        }
        self.state = next;
        out
    }

    /// Records a pose without arbitrating, so a standby instance has fresh
    /// inputs the moment it takes over.
    pub fn remember(&mut self, pose: LocalPose) {
        match pose.source {
            PoseSource::Ekf => {
                self.state.observe_ekf(&pose);
                self.ekf = Some(pose);
            }
            PoseSource::GnssTop => self.top = Some(pose),
            PoseSource::GnssBottom => self.bottom = Some(pose),
        }
    }

    pub fn remember_flag(&mut self, flag: &RaceFlag) {
        if flag.origin == FlagOrigin::Mylaps {
            self.mylaps_last = Some(flag.stamp);
        }
    }

    /// Takes in one pose and forwards it if its source is the selected one.
    pub fn on_pose(&mut self, pose: LocalPose, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        self.remember(pose);
        if let MuxOutput::Pose(p) = self.select(ctx) {
            if p.source == pose.source && p.stamp == pose.stamp {
                ctx.publish(topics::BEST_ODOMETRY, Payload::Pose(pose))?;
            }
        }
        Ok(())
    }

    /// MyLaps flags always pass; spoofed flags pass only while MyLaps is
    /// stale, so each forwarded message has a single origin.
    pub fn on_flag(&mut self, flag: RaceFlag, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let forward = match flag.origin {
            FlagOrigin::Mylaps => {
                self.mylaps_last = Some(flag.stamp);
                true
            }
            FlagOrigin::Spoofed => self
                .mylaps_last
                .is_none_or(|t| ctx.now.since(t) > SimDuration::from_millis(self.state.cfg.flag_fresh_ms)),
        };
        if forward {
            ctx.publish(topics::BEST_FLAGS, Payload::Flag(flag))?;
        }
        Ok(())
    }

    /// Re-evaluates staleness once per tick.
    pub fn on_tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        if self.select(ctx) == MuxOutput::NoOdometry {
            ctx.publish(topics::NO_ODOMETRY, Payload::NoOdometry)?;
        }
        Ok(())
    }
}

pub struct TopicMultiplexerNode {
    rate_hz: f64,
    core: MuxCore,
    counter: u64,
}

impl TopicMultiplexerNode {
    pub fn new(rate_hz: f64, cfg: MuxConfig) -> Self {
        TopicMultiplexerNode {
            rate_hz,
            core: MuxCore::new(cfg, true),
            counter: 0,
        }
    }

    pub fn state(&self) -> &MuxState {
        &self.core.state
    }
}

impl Node for TopicMultiplexerNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "topic_multiplexer",
            self.rate_hz,
            vec![
                topics::EKF_ODOMETRY.to_string(),
                topics::TOP_CARTESIAN.to_string(),
                topics::BOTTOM_CARTESIAN.to_string(),
                topics::MYLAPS_FLAGS.to_string(),
                topics::SPOOFED_FLAGS.to_string(),
            ],
            vec![
                topics::BEST_ODOMETRY.to_string(),
                topics::NO_ODOMETRY.to_string(),
                topics::BEST_FLAGS.to_string(),
                topics::heartbeat("topic_multiplexer"),
            ],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                Payload::Pose(p) => self.core.on_pose(p, ctx)?,
                Payload::Flag(f) => self.core.on_flag(f, ctx)?,
                _ => {}
            }
        }
        self.core.on_tick(ctx)?;
        self.counter += 1;
        ctx.publish(&topics::heartbeat("topic_multiplexer"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }
}

/// Stand-in for a disabled multiplexer: forwards the EKF and MyLaps flags
/// unchecked.
pub struct EkfPassthroughNode {
    rate_hz: f64,
    counter: u64,
}

impl EkfPassthroughNode {
    pub fn new(rate_hz: f64) -> Self {
        EkfPassthroughNode { rate_hz, counter: 0 }
    }
}

impl Node for EkfPassthroughNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "topic_multiplexer",
            self.rate_hz,
            [topics::EKF_ODOMETRY, topics::MYLAPS_FLAGS],
            [topics::BEST_ODOMETRY, topics::BEST_FLAGS, &topics::heartbeat("topic_multiplexer")],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                p @ Payload::Pose(_) => {
                    ctx.publish(topics::BEST_ODOMETRY, p)?;
                }
                p @ Payload::Flag(_) => {
                    ctx.publish(topics::BEST_FLAGS, p)?;
                }
                _ => {}
            }
        }
        self.counter += 1;
        ctx.publish(&topics::heartbeat("topic_multiplexer"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(source: PoseSource, cov: f64, t_ms: u64) -> LocalPose {
        LocalPose::new(0.0, 0.0, 0.0, [[cov, 0.0], [0.0, cov]], source, SimTime::from_millis(t_ms))
    }

    const NOW: SimTime = SimTime::from_millis(1000);

    #[test]
    fn high_ekf_covariance_falls_back_to_gnss() {
        let s = MuxState::new(MuxConfig::default());
        let ekf = pose(PoseSource::Ekf, 0.12385, 1000);
        let top = pose(PoseSource::GnssTop, 0.000069, 980);
        let (out, next) = mux_select(&s, Some(&ekf), Some(&top), None, NOW);
        assert_eq!(out, MuxOutput::Pose(top));
        assert_eq!(next.source, Some(PoseSource::GnssTop));
    }

    #[test]
    fn good_ekf_with_streak_is_selected() {
        let mut s = MuxState::new(MuxConfig::default());
        s.source = Some(PoseSource::GnssTop);
        s.streak = 20;
        let ekf = pose(PoseSource::Ekf, 0.05, 1000);
        let top = pose(PoseSource::GnssTop, 0.000069, 980);
        let (out, next) = mux_select(&s, Some(&ekf), Some(&top), None, NOW);
        assert_eq!(out, MuxOutput::Pose(ekf));
        assert_eq!(next.source, Some(PoseSource::Ekf));
    }

    #[test]
    fn all_stale_means_no_odometry() {
        let s = MuxState::new(MuxConfig::default());
        let ekf = pose(PoseSource::Ekf, 0.01, 800);
        let top = pose(PoseSource::GnssTop, 0.01, 700);
        let bottom = pose(PoseSource::GnssBottom, 0.01, 790);
        let (out, next) = mux_select(&s, Some(&ekf), Some(&top), Some(&bottom), NOW);
        assert_eq!(out, MuxOutput::NoOdometry);
        assert_eq!(next.source, None);
    }

    #[test]
    fn streak_resets_on_one_bad_message() {
        let cfg = MuxConfig::default();
        let mut s = MuxState::new(cfg);
        s.source = Some(PoseSource::GnssTop);
        for i in 0..cfg.required_streak - 1 {
            s.observe_ekf(&pose(PoseSource::Ekf, 0.01, 900 + i as u64));
        }
        let bad = pose(PoseSource::Ekf, 0.2, 1000);
        s.observe_ekf(&bad);
        assert_eq!(s.streak, 0);
        let top = pose(PoseSource::GnssTop, 0.0001, 990);
        let (_, next) = mux_select(&s, Some(&bad), Some(&top), None, NOW);
        assert_eq!(next.source, Some(PoseSource::GnssTop));
        // a good EKF message without the streak still does not win
        let good = pose(PoseSource::Ekf, 0.01, 1000);
        s.observe_ekf(&good);
        let (_, next) = mux_select(&s, Some(&good), Some(&top), None, NOW);
        assert_eq!(next.source, Some(PoseSource::GnssTop));
    }

    #[test]
    fn more_accurate_gnss_wins_and_top_breaks_ties() {
        let mut s = MuxState::new(MuxConfig::default());
        s.source = None;
        let top = pose(PoseSource::GnssTop, 0.02, 990);
        let bottom = pose(PoseSource::GnssBottom, 0.01, 990);
        let (out, _) = mux_select(&s, None, Some(&top), Some(&bottom), NOW);
        assert_eq!(out, MuxOutput::Pose(bottom));
        let bottom = pose(PoseSource::GnssBottom, 0.02, 990);
        let (out, _) = mux_select(&s, None, Some(&top), Some(&bottom), NOW);
        assert_eq!(out, MuxOutput::Pose(top));
    }

    proptest::proptest! {
        /// The EKF is only ever selected with a covariance under the ceiling.
        #[test]
        fn ekf_output_respects_threshold(
            covs in proptest::collection::vec(0.0f64..0.3, 1..200),
        ) {
            let cfg = MuxConfig::default();
            let mut s = MuxState::new(cfg);
            for (i, c) in covs.iter().enumerate() {
                let t = SimTime::from_millis(10 * i as u64);
                let e = pose(PoseSource::Ekf, *c, 10 * i as u64);
                s.observe_ekf(&e);
                let top = pose(PoseSource::GnssTop, 0.0001, 10 * i as u64);
                let (out, next) = mux_select(&s, Some(&e), Some(&top), None, t);
                if let MuxOutput::Pose(p) = out {
                    if p.source == PoseSource::Ekf {
                        proptest::prop_assert!(p.scalar_cov <= cfg.cov_threshold);
                    }
                }
                s = next;
            }
        }
    }
}
