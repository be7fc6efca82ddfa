//! Heartbeat bookkeeping, the node health escalation ladder and the graceful
//! stop data-health checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{HaloAction, HaloError, StopReason};
use crate::bus::{SimDuration, SimTime};

/// Nodes whose heartbeats the node health monitor watches.
pub const MONITORED_NODES: [&str; 6] = [
    "graceful_stop",
    "lidar",
    "long_control",
    "path_tracker",
    "ssc_interface",
    "topic_multiplexer",
];

pub const CH_DIAGNOSTICS: &str = "diagnostics";
pub const CH_GNSS_TOP: &str = "gnss_top";
pub const CH_GNSS_BOTTOM: &str = "gnss_bottom";
pub const CH_BASESTATION: &str = "basestation";
pub const CH_MYLAPS: &str = "mylaps";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub last_time: SimTime,
    pub last_counter: Option<u64>,
    pub missed: u64,
    pub threshold: SimDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub last_time: SimTime,
    /// Last self-reported accuracy, meters.
    pub accuracy: Option<f64>,
    /// Latched once the channel reports a fault.
    pub fault: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HealthLedger {
    pub nodes: BTreeMap<String, NodeRecord>,
    pub channels: BTreeMap<String, ChannelRecord>,
}

impl HealthLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts watching `node`; it counts as having beaten at `now`.
    pub fn monitor(&mut self, node: &str, threshold: SimDuration, now: SimTime) {
        self.nodes.insert(
            node.to_string(),
            NodeRecord {
                last_time: now,
                last_counter: None,
                missed: 0,
                threshold,
            },
        );
    }

    pub fn touch_channel(&mut self, name: &str, now: SimTime, accuracy: Option<f64>, fault: bool) {
        let ch = self.channels.entry(name.to_string()).or_default();
        ch.last_time = ch.last_time.max(now);
        ch.accuracy = accuracy.or(ch.accuracy);
        ch.fault |= fault;
    }

    pub fn channel(&self, name: &str) -> ChannelRecord {
        self.channels.get(name).copied().unwrap_or_default()
    }

    /// Monitored nodes silent for strictly longer than their threshold.
    pub fn dead_nodes(&self, now: SimTime) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter(|(_, r)| now.since(r.last_time) > r.threshold)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// Records one heartbeat. A counter jump of `g` counts `g - 1` missed
/// beats. A counter that goes backwards means the node restarted: its
/// record is reset and the regression reported.
pub fn nh_on_heartbeat(ledger: &mut HealthLedger, node: &str, counter: u64, now: SimTime) -> Result<(), HaloError> {
    let Some(rec) = ledger.nodes.get_mut(node) else {
        return Ok(());
    };
    rec.last_time = rec.last_time.max(now);
    match rec.last_counter {
        Some(prev) if counter < prev => {
            rec.last_counter = Some(counter);
            rec.missed = 0;
            Err(HaloError::CounterRegression {
                node: node.to_string(),
                previous: prev,
                got: counter,
            })
        }
        Some(prev) => {
            rec.missed += (counter - prev).saturating_sub(1);
            rec.last_counter = Some(counter);
            Ok(())
        }
        None => {
            rec.last_counter = Some(counter);
            Ok(())
        }
    }
}

/// Maps a set of dead nodes to the actions the monitor must take. The mux
/// takeover and operator notice are independent of the stop ladder; the
/// ladder picks the gentlest stop that still has a live path to the
/// actuators.
pub fn escalate(dead: &BTreeSet<String>, moderate_brake: f64) -> Vec<HaloAction> {
    let is_dead = |n: &str| dead.contains(n);
    let mut actions = Vec::new();
    if is_dead("topic_multiplexer") {
        actions.push(HaloAction::TakeOverMux);
    }
    if is_dead("lidar") {
        actions.push(HaloAction::NotifyOperator);
    }
    if is_dead("ssc_interface") {
        actions.push(HaloAction::EngineShutdown);
    } else if is_dead("long_control") {
        actions.push(HaloAction::DirectBrake(moderate_brake));
    } else if is_dead("graceful_stop") {
        actions.push(HaloAction::PublishZeroVelocity);
    } else if is_dead("path_tracker") {
        actions.push(HaloAction::RequestGracefulStop);
    }
    actions
}

pub fn nh_tick(ledger: &HealthLedger, now: SimTime, moderate_brake: f64) -> Vec<HaloAction> {
    escalate(&ledger.dead_nodes(now), moderate_brake)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsThresholds {
    pub gnss_silence_ms: u64,
    /// Meters.
    pub gnss_stddev: f64,
    pub basestation_ms: u64,
    pub mylaps_ms: u64,
}

impl Default for GsThresholds {
    fn default() -> Self {
        GsThresholds {
            gnss_silence_ms: 500,
            gnss_stddev: 0.35,
            basestation_ms: 10_000,
            mylaps_ms: 25_000,
        }
    }
}

/// First failed data-health check, most severe first: diagnostics, GNSS
/// silence, GNSS accuracy, base station, MyLaps.
pub fn gs_check(ledger: &HealthLedger, now: SimTime, th: &GsThresholds) -> Option<StopReason> {
    let silent = |ch: &ChannelRecord, ms: u64| now.since(ch.last_time) > SimDuration::from_millis(ms);

    if ledger.channel(CH_DIAGNOSTICS).fault {
        return Some(StopReason::Diagnostics);
    }
    let units = [ledger.channel(CH_GNSS_TOP), ledger.channel(CH_GNSS_BOTTOM)];
    if units.iter().all(|u| silent(u, th.gnss_silence_ms)) {
        return Some(StopReason::GnssSilence);
    }
    // the best live receiver decides; one bad unit alone is tolerated
    let best = units
        .iter()
        .filter(|u| !silent(u, th.gnss_silence_ms))
        .filter_map(|u| u.accuracy)
        .reduce(f64::min);
    if best.is_some_and(|a| a > th.gnss_stddev) {
        return Some(StopReason::GnssInaccurate);
    }
    if silent(&ledger.channel(CH_BASESTATION), th.basestation_ms) {
        return Some(StopReason::BasestationTimeout);
    }
    if silent(&ledger.channel(CH_MYLAPS), th.mylaps_ms) {
        return Some(StopReason::MylapsTimeout);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: fn(u64) -> SimTime = SimTime::from_millis;

    fn fresh_ledger(now: SimTime) -> HealthLedger {
        let mut l = HealthLedger::new();
        for ch in [CH_GNSS_TOP, CH_GNSS_BOTTOM] {
            l.touch_channel(ch, now, Some(0.02), false);
        }
        for ch in [CH_DIAGNOSTICS, CH_BASESTATION, CH_MYLAPS] {
            l.touch_channel(ch, now, None, false);
        }
        l
    }

    #[test]
    fn counter_gaps_and_regressions() {
        let mut l = HealthLedger::new();
        l.monitor("a", SimDuration::from_millis(500), SimTime::ZERO);
        for c in [5, 6, 7] {
            nh_on_heartbeat(&mut l, "a", c, MS(10)).unwrap();
        }
        assert_eq!(l.nodes["a"].missed, 0);

        let mut l2 = HealthLedger::new();
        l2.monitor("a", SimDuration::from_millis(500), SimTime::ZERO);
        nh_on_heartbeat(&mut l2, "a", 5, MS(10)).unwrap();
        nh_on_heartbeat(&mut l2, "a", 8, MS(20)).unwrap();
        assert_eq!(l2.nodes["a"].missed, 2);

        let err = nh_on_heartbeat(&mut l2, "a", 3, MS(30)).unwrap_err();
        assert!(matches!(err, HaloError::CounterRegression { previous: 8, got: 3, .. }));
        assert_eq!(l2.nodes["a"].missed, 0);
        assert_eq!(l2.nodes["a"].last_counter, Some(3));
    }

    #[test]
    fn escalation_examples() {
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(escalate(&set(&["topic_multiplexer"]), 0.4), vec![HaloAction::TakeOverMux]);
        assert_eq!(escalate(&set(&["path_tracker"]), 0.4), vec![HaloAction::RequestGracefulStop]);
        assert_eq!(
            escalate(&set(&["graceful_stop", "long_control", "ssc_interface"]), 0.4),
            vec![HaloAction::EngineShutdown]
        );
        assert_eq!(
            escalate(&set(&["graceful_stop", "path_tracker"]), 0.4),
            vec![HaloAction::PublishZeroVelocity]
        );
        assert_eq!(
            escalate(&set(&["graceful_stop", "long_control"]), 0.4),
            vec![HaloAction::DirectBrake(0.4)]
        );
        assert_eq!(escalate(&set(&["lidar"]), 0.4), vec![HaloAction::NotifyOperator]);
        assert!(escalate(&set(&[]), 0.4).is_empty());
    }

    /// Every subset of the six monitored nodes gets a defined, consistent
    /// response.
    #[test]
    fn escalation_is_total() {
        for mask in 0u32..64 {
            let dead: BTreeSet<String> = MONITORED_NODES
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, n)| n.to_string())
                .collect();
            let acts = escalate(&dead, 0.4);
            assert_eq!(acts.contains(&HaloAction::TakeOverMux), dead.contains("topic_multiplexer"));
            assert_eq!(acts.contains(&HaloAction::NotifyOperator), dead.contains("lidar"));
            let stops = acts
                .iter()
                .filter(|a| !matches!(a, HaloAction::TakeOverMux | HaloAction::NotifyOperator))
                .count();
            let needs_stop = ["ssc_interface", "long_control", "graceful_stop", "path_tracker"]
                .iter()
                .any(|n| dead.contains(*n));
            assert_eq!(stops, usize::from(needs_stop), "mask {mask:06b}: {acts:?}");
        }
    }

    #[test]
    fn dead_after_threshold_only() {
        let mut l = HealthLedger::new();
        l.monitor("topic_multiplexer", SimDuration::from_millis(500), SimTime::ZERO);
        nh_on_heartbeat(&mut l, "topic_multiplexer", 1, MS(1000)).unwrap();
        assert!(nh_tick(&l, MS(1500), 0.4).is_empty());
        assert_eq!(nh_tick(&l, MS(1501), 0.4), vec![HaloAction::TakeOverMux]);
    }

    #[test]
    fn gs_check_examples() {
        let th = GsThresholds::default();
        let now = SimTime::from_secs_f64(30.0);

        let l = fresh_ledger(now);
        assert_eq!(gs_check(&l, now, &th), None);

        let mut l = fresh_ledger(now);
        l.channels.get_mut(CH_MYLAPS).unwrap().last_time = SimTime::from_secs_f64(4.0);
        assert_eq!(gs_check(&l, now, &th), Some(StopReason::MylapsTimeout));

        let mut l = fresh_ledger(now);
        for ch in [CH_GNSS_TOP, CH_GNSS_BOTTOM] {
            l.channels.get_mut(ch).unwrap().accuracy = Some(0.40);
        }
        assert_eq!(gs_check(&l, now, &th), Some(StopReason::GnssInaccurate));

        for (silence_ms, expect) in [(450, None), (550, Some(StopReason::GnssSilence))] {
            let mut l = fresh_ledger(now);
            for ch in [CH_GNSS_TOP, CH_GNSS_BOTTOM] {
                l.channels.get_mut(ch).unwrap().last_time = SimTime::from_nanos(now.as_nanos() - silence_ms * 1_000_000);
            }
            assert_eq!(gs_check(&l, now, &th), expect, "silence {silence_ms} ms");
        }
    }

    #[test]
    fn diagnostics_outranks_everything() {
        let th = GsThresholds::default();
        let now = SimTime::from_secs_f64(60.0);
        let mut l = HealthLedger::new();
        l.touch_channel(CH_DIAGNOSTICS, SimTime::ZERO, None, true);
        assert_eq!(gs_check(&l, now, &th), Some(StopReason::Diagnostics));
        assert!(!StopReason::Diagnostics.recoverable());
        assert!(StopReason::GnssSilence.recoverable());
    }

    proptest::proptest! {
        /// Making any channel older never clears a stop request.
        #[test]
        fn gs_check_is_monotone_in_staleness(
            ages in proptest::collection::vec(0u64..40_000, 5),
            acc in proptest::collection::vec(0.0f64..0.6, 2),
            which in 0usize..5,
            extra in 1u64..30_000,
        ) {
            let th = GsThresholds::default();
            let now = SimTime::from_secs_f64(60.0);
            let names = [CH_DIAGNOSTICS, CH_GNSS_TOP, CH_GNSS_BOTTOM, CH_BASESTATION, CH_MYLAPS];
            let build = |ages: &[u64]| {
                let mut l = HealthLedger::new();
                for (i, n) in names.iter().enumerate() {
                    let accuracy = match i { 1 => Some(acc[0]), 2 => Some(acc[1]), _ => None };
                    l.touch_channel(n, SimTime::from_millis(60_000 - ages[i]), accuracy, false);
                }
                l
            };
            let before = gs_check(&build(&ages), now, &th);
            let mut older = ages.clone();
            older[which] = (older[which] + extra).min(60_000);
            let after = gs_check(&build(&older), now, &th);
            proptest::prop_assert!(before.is_none() || after.is_some());
        }
    }
}
