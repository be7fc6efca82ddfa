use serde::{Deserialize, Serialize};

use super::health::{CH_BASESTATION, CH_DIAGNOSTICS, CH_GNSS_BOTTOM, CH_GNSS_TOP, CH_MYLAPS};
use super::mux::MuxCore;
use super::{
    close_the_door, data_health_gate, flag_transition, gs_check, nh_on_heartbeat, nh_tick, region_transition, DoorConfig,
    DoorWindow, FlagDecision, GateDecision, GsThresholds, HaloAction, HealthLedger, MuxConfig, Region, SpeedTable,
    StopReason,
};
use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimDuration, SimTime};
use crate::comm::{bumper_kill, FlagColor, FlagOrigin};
use crate::control::ActuatorCommand;
use crate::localization::GnssUnit;
use crate::SimError;

/// Requests and overrides from the health monitor stay in force this long.
const OVERRIDE_FRESHNESS: SimDuration = SimDuration::from_millis(200);

/// Watches data health and publishes the stop flag consumed by long control.
pub struct GracefulStopNode {
    rate_hz: f64,
    th: GsThresholds,
    ledger: HealthLedger,
    last_best_odom: SimTime,
    last_no_odom: Option<SimTime>,
    last_request: Option<SimTime>,
    monitor_last: SimTime,
    watch_monitor: bool,
    monitor_threshold: SimDuration,
    active: Option<StopReason>,
    counter: u64,
}

impl GracefulStopNode {
    /// `watch_monitor` enables the check on the node health monitor's own
    /// heartbeat.
    pub fn new(rate_hz: f64, th: GsThresholds, watch_monitor: bool, monitor_threshold: SimDuration) -> Self {
        let mut ledger = HealthLedger::new();
        for ch in [CH_DIAGNOSTICS, CH_GNSS_TOP, CH_GNSS_BOTTOM, CH_BASESTATION, CH_MYLAPS] {
            ledger.touch_channel(ch, SimTime::ZERO, None, false);
        }
        GracefulStopNode {
            rate_hz,
            th,
            ledger,
            last_best_odom: SimTime::ZERO,
            last_no_odom: None,
            last_request: None,
            monitor_last: SimTime::ZERO,
            watch_monitor,
            monitor_threshold,
            active: None,
            counter: 0,
        }
    }

    fn evaluate(&self, now: SimTime) -> Option<StopReason> {
        if let Some(r) = gs_check(&self.ledger, now, &self.th) {
            return Some(r);
        }
        if self.last_no_odom.is_some_and(|t| t > self.last_best_odom) {
            return Some(StopReason::NoOdometry);
        }
        if self.last_request.is_some_and(|t| now.since(t) <= OVERRIDE_FRESHNESS) {
            return Some(StopReason::NodeHealthRequest);
        }
        if self.watch_monitor && now.since(self.monitor_last) > self.monitor_threshold {
            return Some(StopReason::MonitorLost);
        }
        None
    }
}

impl Node for GracefulStopNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "graceful_stop",
            self.rate_hz,
            vec![
                topics::DIAGNOSTICS.to_string(),
                topics::GNSS_TOP_FIX.to_string(),
                topics::GNSS_BOTTOM_FIX.to_string(),
                topics::JOYSTICK.to_string(),
                topics::MYLAPS_FLAGS.to_string(),
                topics::BEST_ODOMETRY.to_string(),
                topics::NO_ODOMETRY.to_string(),
                topics::STOP_REQUEST.to_string(),
                topics::heartbeat("node_health_monitor"),
            ],
            vec![topics::GRACEFUL_STOP_FLAG.to_string(), topics::heartbeat("graceful_stop")],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        for msg in std::mem::take(&mut ctx.inbox) {
            let t = msg.stamp;
            match msg.payload {
                Payload::Diagnostics(d) => self.ledger.touch_channel(CH_DIAGNOSTICS, t, None, !d.ok),
                Payload::Gnss(f) => {
                    let ch = match f.unit {
                        GnssUnit::Top => CH_GNSS_TOP,
                        GnssUnit::Bottom => CH_GNSS_BOTTOM,
                    };
                    self.ledger.touch_channel(ch, t, Some(f.worst_stddev()), false);
                }
                Payload::Joystick(_) => self.ledger.touch_channel(CH_BASESTATION, t, None, false),
                Payload::Flag(f) if f.origin == FlagOrigin::Mylaps => self.ledger.touch_channel(CH_MYLAPS, t, None, false),
                Payload::Pose(_) => self.last_best_odom = self.last_best_odom.max(t),
                Payload::NoOdometry => self.last_no_odom = Some(t),
                Payload::StopRequest { .. } => self.last_request = Some(t),
                Payload::Heartbeat { .. } => self.monitor_last = self.monitor_last.max(t),
                _ => {}
            }
        }

        let reason = self.evaluate(ctx.now);
        if reason != self.active {
            match reason {
                Some(r) => ctx.halo(
                    "graceful_stop",
                    format!("reason={} recoverable={}", r.as_str(), r.recoverable()),
                ),
                None => ctx.halo("graceful_stop_clear", String::new()),
            }
            self.active = reason;
        }
        ctx.publish(
            topics::GRACEFUL_STOP_FLAG,
            Payload::StopFlag {
                stop: reason.is_some(),
                reason,
            },
        )?;
        self.counter += 1;
        ctx.publish(&topics::heartbeat("graceful_stop"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }
}

/// Watches the heartbeats of the safety-critical nodes and escalates.
pub struct NodeHealthMonitorNode {
    rate_hz: f64,
    ledger: HealthLedger,
    moderate_brake: f64,
    mux: MuxCore,
    actions: Vec<HaloAction>,
    counter: u64,
}

impl NodeHealthMonitorNode {
    /// Monitors every node in `monitored`; pass `MONITORED_NODES` for the
    /// full stack.
    pub fn new(rate_hz: f64, threshold: SimDuration, moderate_brake: f64, mux: MuxConfig, monitored: &[&str]) -> Self {
        let mut ledger = HealthLedger::new();
        for n in monitored {
            ledger.monitor(n, threshold, SimTime::ZERO);
        }
        NodeHealthMonitorNode {
            rate_hz,
            ledger,
            moderate_brake,
            mux: MuxCore::new(mux, false),
            actions: Vec::new(),
            counter: 0,
        }
    }

    pub fn ledger(&self) -> &HealthLedger {
        &self.ledger
    }

    fn taking_over(&self) -> bool {
        self.actions.contains(&HaloAction::TakeOverMux)
    }
}

impl Node for NodeHealthMonitorNode {
    fn descriptor(&self) -> NodeDescriptor {
        let mut subs: Vec<String> = self.ledger.nodes.keys().map(|n| topics::heartbeat(n)).collect();
        subs.extend(
            [topics::TOP_CARTESIAN, topics::BOTTOM_CARTESIAN, topics::MYLAPS_FLAGS, topics::SPOOFED_FLAGS].map(String::from),
        );
        let pubs = [
            topics::STOP_REQUEST,
            topics::DESIRED_VELOCITY,
            topics::NHM_BRAKE,
            topics::ENGINE_SHUTDOWN,
            topics::OPERATOR_NOTIFICATION,
            topics::BEST_ODOMETRY,
            topics::NO_ODOMETRY,
            topics::BEST_FLAGS,
        ]
        .map(String::from)
        .into_iter()
        .chain([topics::heartbeat("node_health_monitor")]);
        NodeDescriptor::new("node_health_monitor", self.rate_hz, subs, pubs)
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let inbox = std::mem::take(&mut ctx.inbox);
        for msg in &inbox {
            if let Payload::Heartbeat { counter } = msg.payload {
                let node = msg.topic.trim_end_matches("/heartbeat");
                if let Err(e) = nh_on_heartbeat(&mut self.ledger, node, counter, msg.stamp) {
                    ctx.error("heartbeat", e.to_string());
                }
            }
        }

        let actions = nh_tick(&self.ledger, ctx.now, self.moderate_brake);
        let dead: Vec<String> = self.ledger.dead_nodes(ctx.now).into_iter().collect();
        let dead = dead.join(",");
        for a in &actions {
            if !self.actions.contains(a) {
                ctx.halo(a.as_str(), format!("dead={dead}"));
                if *a == HaloAction::NotifyOperator {
                    ctx.publish(
                        topics::OPERATOR_NOTIFICATION,
                        Payload::Notification {
                            text: format!("heartbeat lost: {dead}"),
                        },
                    )?;
                }
            }
        }
        self.actions = actions;

        for msg in inbox {
            match msg.payload {
                Payload::Pose(p) if self.taking_over() => self.mux.on_pose(p, ctx)?,
                Payload::Pose(p) => self.mux.remember(p),
                Payload::Flag(f) if self.taking_over() => self.mux.on_flag(f, ctx)?,
                Payload::Flag(f) => self.mux.remember_flag(&f),
                _ => {}
            }
        }
        if self.taking_over() {
            self.mux.on_tick(ctx)?;
        }

        for a in self.actions.clone() {
            match a {
                HaloAction::RequestGracefulStop => {
                    let reason = "path_tracker_dead".to_string();
                    ctx.publish(topics::STOP_REQUEST, Payload::StopRequest { reason })?;
                }
                HaloAction::PublishZeroVelocity => {
                    ctx.publish(topics::DESIRED_VELOCITY, Payload::DesiredVelocity { mps: 0.0 })?;
                }
                HaloAction::DirectBrake(level) => {
                    ctx.publish(topics::NHM_BRAKE, Payload::BrakeOverride { level })?;
                }
                HaloAction::EngineShutdown => {
                    let cause = "node_health".to_string();
                    ctx.publish(topics::ENGINE_SHUTDOWN, Payload::EngineShutdown { cause })?;
                }
                HaloAction::TakeOverMux | HaloAction::NotifyOperator => {}
            }
        }
        self.counter += 1;
        ctx.publish(
            &topics::heartbeat("node_health_monitor"),
            Payload::Heartbeat { counter: self.counter },
        )?;
        Ok(())
    }
}

/// Physical range of the actuator command fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SscLimits {
    /// Degrees either side of center.
    pub steering_max: f64,
    pub gear_min: u8,
    pub gear_max: u8,
}

impl Default for SscLimits {
    fn default() -> Self {
        SscLimits {
            steering_max: 24.0,
            gear_min: 1,
            gear_max: 6,
        }
    }
}

/// Bridge to the drive-by-wire layer. Gates every command field, applies
/// overrides, and hosts the behavioral monitor: flag-change speed updates,
/// region tracking, overtakes and closing the door.
pub struct SscInterfaceNode {
    rate_hz: f64,
    limits: SscLimits,
    guard: bool,
    table: SpeedTable,
    window: DoorWindow,
    door_open: bool,
    region: Region,
    last_color: Option<FlagColor>,
    accepted: ActuatorCommand,
    brake_override: Option<(f64, SimTime)>,
    steer_override: Option<(f64, SimTime)>,
    shutdown_sent: bool,
    raceline: String,
    overtake: String,
    counter: u64,
}

impl SscInterfaceNode {
    /// With `guard` off the behavioral checks are bypassed: every flag
    /// message re-publishes a speed and a single far-ahead reading merges.
    pub fn new(
        rate_hz: f64,
        limits: SscLimits,
        table: SpeedTable,
        door: DoorConfig,
        guard: bool,
        initial_gear: u8,
    ) -> Result<Self, SimError> {
        let door = if guard {
            door
        } else {
            DoorConfig { n: 1, k: 1, ..door }
        };
        Ok(SscInterfaceNode {
            rate_hz,
            limits,
            guard,
            table,
            window: DoorWindow::new(door)?,
            door_open: false,
            region: Region::OnTrack,
            last_color: None,
            accepted: ActuatorCommand {
                gear: initial_gear,
                ..ActuatorCommand::default()
            },
            brake_override: None,
            steer_override: None,
            shutdown_sent: false,
            raceline: "raceline".to_string(),
            overtake: "overtake".to_string(),
            counter: 0,
        })
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    fn gate(&self, ctx: &mut NodeContext<'_>, field: &str, value: f64, lo: f64, hi: f64) -> bool {
        match data_health_gate(value, lo, hi, 0.0, 0.0) {
            GateDecision::Accept => true,
            GateDecision::Reject(r) => {
                ctx.halo("gate_reject", format!("field={field} value={value:.4} reason={}", r.as_str()));
                false
            }
        }
    }

    fn shutdown(&mut self, ctx: &mut NodeContext<'_>, cause: &str) -> Result<(), SimError> {
        if !self.shutdown_sent {
            ctx.halo("engine_shutdown", format!("cause={cause}"));
            self.shutdown_sent = true;
        }
        ctx.publish(
            topics::ENGINE_SHUTDOWN,
            Payload::EngineShutdown {
                cause: cause.to_string(),
            },
        )?;
        Ok(())
    }

    fn on_flag(&mut self, color: FlagColor, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let prev = if self.guard { self.last_color } else { None };
        let changed = self.last_color != Some(color);
        match flag_transition(prev, color, self.region, &self.table) {
            FlagDecision::Hold => {}
            FlagDecision::Publish(mps) => {
                ctx.publish(topics::DESIRED_VELOCITY, Payload::DesiredVelocity { mps })?;
            }
            FlagDecision::EngineShutdown => self.shutdown(ctx, "purple_flag")?,
        }
        if changed && color == FlagColor::WavingGreen {
            self.door_open = true;
            self.window.clear();
            ctx.publish(
                topics::DESIRED_PATH,
                Payload::DesiredPath {
                    name: self.overtake.clone(),
                },
            )?;
            ctx.halo("overtake", format!("path={}", self.overtake));
        }
        self.last_color = Some(color);
        Ok(())
    }

    fn on_detection(&mut self, sep: f64, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        if !self.door_open {
            return Ok(());
        }
        let (merge, w) = close_the_door(self.window.clone(), sep);
        self.window = w;
        if merge {
            let cfg = self.window.config();
            ctx.halo(
                "merge",
                format!("sep={sep:.3} hits={} n={} k={}", self.window.hits(), cfg.n, cfg.k),
            );
            ctx.publish(
                topics::DESIRED_PATH,
                Payload::DesiredPath {
                    name: self.raceline.clone(),
                },
            )?;
            self.door_open = false;
            self.window.clear();
        }
        Ok(())
    }
}

impl Node for SscInterfaceNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "ssc_interface",
            self.rate_hz,
            [
                topics::LONG_COMMAND,
                topics::STEERING,
                topics::NHM_BRAKE,
                topics::JOYSTICK,
                topics::BEST_FLAGS,
                topics::BEST_ODOMETRY,
                topics::DETECTIONS,
            ]
            .map(String::from)
            .to_vec(),
            [
                topics::RAPTOR_COMMAND,
                topics::DESIRED_VELOCITY,
                topics::DESIRED_PATH,
                topics::ENGINE_SHUTDOWN,
            ]
            .map(String::from)
            .into_iter()
            .chain([topics::heartbeat("ssc_interface")])
            .collect::<Vec<_>>(),
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let l = self.limits;
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                Payload::Command(c) => {
                    if self.gate(ctx, "accel", c.accelerator, 0.0, 1.0) {
                        self.accepted.accelerator = c.accelerator;
                    }
                    if self.gate(ctx, "brake", c.brake, 0.0, 1.0) {
                        self.accepted.brake = c.brake;
                    }
                    if self.gate(ctx, "gear", c.gear as f64, l.gear_min as f64, l.gear_max as f64) {
                        self.accepted.gear = c.gear;
                    }
                }
                Payload::Steering { degrees } => {
                    if self.gate(ctx, "steering", degrees, -l.steering_max, l.steering_max) {
                        self.accepted.steering = degrees;
                    }
                }
                Payload::BrakeOverride { level } => self.brake_override = Some((level.clamp(0.0, 1.0), msg.stamp)),
                Payload::Joystick(j) => {
                    if bumper_kill(&j) {
                        self.shutdown(ctx, "bumper_kill")?;
                    }
                    if let Some(s) = j.steer {
                        self.steer_override = Some((s.clamp(-l.steering_max, l.steering_max), msg.stamp));
                    }
                }
                Payload::Flag(f) => self.on_flag(f.color, ctx)?,
                Payload::Pose(p) => {
                    match region_transition([p.x, p.y], &ctx.world.track, self.region) {
                        Ok(r) if r != self.region => {
                            ctx.halo("region", format!("from={} to={}", self.region.as_str(), r.as_str()));
                            self.region = r;
                        }
                        Ok(_) => {}
                        Err(e) => ctx.error("region", e.to_string()),
                    }
                }
                Payload::Detection(d) => self.on_detection(d.separation, ctx)?,
                _ => {}
            }
        }

        let fresh = |t: SimTime| ctx.now.since(t) <= OVERRIDE_FRESHNESS;
        let mut cmd = self.accepted;
        if let Some((s, t)) = self.steer_override {
            if fresh(t) {
                cmd.steering = s;
            }
        }
        if let Some((level, t)) = self.brake_override {
            if fresh(t) && level > 0.0 {
                cmd.accelerator = 0.0;
                cmd.brake = cmd.brake.max(level);
            }
        }
        if cmd.accelerator > 0.0 && cmd.brake > 0.0 {
            cmd.accelerator = 0.0;
        }
        cmd.stamp = ctx.now;
        ctx.publish(topics::RAPTOR_COMMAND, Payload::Command(cmd))?;
        self.counter += 1;
        ctx.publish(&topics::heartbeat("ssc_interface"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }
}
