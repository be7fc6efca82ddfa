use super::{bumper_kill, flag_feed_tick, scheduled_flag, DiagnosticsReport, FlagColor, FlagEvent, FlagOrigin, JoystickEvent, JoystickMsg, RaceFlag, TelemetryMsg};
use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimDuration, SimTime};
use crate::harness::FaultKind;
use crate::plant::{sample_wheel_speed, EngineReport};
use crate::SimError;

/// The drive-by-wire layer cuts the engine when commands stop for this long.
pub const DBW_COMMAND_TIMEOUT: SimDuration = SimDuration::from_millis(500);

/// Brake held by the drive-by-wire layer after a command timeout.
const DBW_TIMEOUT_BRAKE: f64 = 0.4;

/// MyLaps receiver: republishes the race-control flag schedule, silent in
/// MyLaps dead arcs.
pub struct RaceFlagInputNode {
    rate_hz: f64,
    schedule: Vec<FlagEvent>,
}

impl RaceFlagInputNode {
    pub fn new(rate_hz: f64, schedule: Vec<FlagEvent>) -> Self {
        RaceFlagInputNode { rate_hz, schedule }
    }
}

impl Node for RaceFlagInputNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new("race_flag_input", self.rate_hz, Vec::<String>::new(), vec![topics::MYLAPS_FLAGS.to_string()])
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let track = &ctx.world.track;
        let pos = if track.coverage.is_empty() {
            0.0
        } else {
            ctx.world.ego_arclength()
        };
        if let Some(flag) = flag_feed_tick(pos, &self.schedule, &ctx.world.track.coverage, ctx.now) {
            ctx.publish(topics::MYLAPS_FLAGS, Payload::Flag(flag))?;
        }
        Ok(())
    }
}

/// The pit base station: joystick frames (which double as its heartbeat)
/// and operator-spoofed race flags.
pub struct BaseStationNode {
    rate_hz: f64,
    flags: Vec<FlagEvent>,
    joystick: Vec<JoystickEvent>,
    counter: u64,
    ticks: u64,
}

impl BaseStationNode {
    pub fn new(rate_hz: f64, flags: Vec<FlagEvent>, joystick: Vec<JoystickEvent>) -> Self {
        BaseStationNode {
            rate_hz,
            flags,
            joystick,
            counter: 0,
            ticks: 0,
        }
    }
}

impl Node for BaseStationNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "base_station",
            self.rate_hz,
            Vec::<String>::new(),
            vec![topics::JOYSTICK.to_string(), topics::SPOOFED_FLAGS.to_string()],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let t = ctx.now.as_secs_f64();
        let period = 1.0 / self.rate_hz;
        self.counter += 1;
        let mut msg = JoystickMsg {
            counter: self.counter,
            stamp: ctx.now,
            ..JoystickMsg::default()
        };
        for ev in self.joystick.iter().filter(|e| e.active(t, period)) {
            msg.accel = ev.accel.or(msg.accel);
            msg.brake = ev.brake.or(msg.brake);
            msg.steer = ev.steer.or(msg.steer);
            msg.bumper_left |= ev.bumper_left;
            msg.bumper_right |= ev.bumper_right;
        }
        ctx.publish(topics::JOYSTICK, Payload::Joystick(msg))?;

        // spoofed flags go out at a tenth of the joystick rate
        if self.ticks % 10 == 0 {
            if let Some(color) = scheduled_flag(&self.flags, FlagOrigin::Spoofed, ctx.now) {
                let flag = RaceFlag {
                    color,
                    origin: FlagOrigin::Spoofed,
                    stamp: ctx.now,
                };
                ctx.publish(topics::SPOOFED_FLAGS, Payload::Flag(flag))?;
            }
        }
        self.ticks += 1;
        Ok(())
    }
}

/// Periodic snapshot of the stack for the pit wall.
pub struct TelemetryNode {
    rate_hz: f64,
    current_v: f64,
    desired_v: f64,
    accuracy: f64,
    position: [f64; 2],
    flag: Option<FlagColor>,
    path: String,
    last_estop: Option<String>,
}

impl TelemetryNode {
    pub fn new(rate_hz: f64, path: &str) -> Self {
        TelemetryNode {
            rate_hz,
            current_v: 0.0,
            desired_v: 0.0,
            accuracy: 0.0,
            position: [0.0, 0.0],
            flag: None,
            path: path.to_string(),
            last_estop: None,
        }
    }
}

impl Node for TelemetryNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "telemetry",
            self.rate_hz,
            [
                topics::BEST_ODOMETRY,
                topics::LONG_STATUS,
                topics::BEST_FLAGS,
                topics::GRACEFUL_STOP_FLAG,
                topics::WHEEL_SPEED,
                topics::ENGINE_SHUTDOWN,
                topics::DESIRED_PATH,
            ],
            [topics::TELEMETRY],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                Payload::Pose(p) => {
                    self.position = [p.x, p.y];
                    self.accuracy = p.scalar_cov;
                }
                Payload::ControlStatus { desired_mps, .. } => self.desired_v = desired_mps,
                Payload::Flag(f) => self.flag = Some(f.color),
                Payload::StopFlag {
                    stop: true,
                    reason: Some(r),
                } => self.last_estop = Some(r.as_str().to_string()),
                Payload::WheelSpeed(w) => self.current_v = w.speed,
                Payload::EngineShutdown { cause } => self.last_estop = Some(cause),
                Payload::DesiredPath { name } => self.path = name,
                _ => {}
            }
        }
        let lateral_error = ctx
            .world
            .track
            .path(&self.path)
            .map(|p| p.project(self.position).lateral.abs())
            .unwrap_or(0.0);
        let msg = TelemetryMsg {
            current_v: self.current_v,
            desired_v: self.desired_v,
            lateral_error,
            localization_accuracy: self.accuracy,
            engine_temp: ctx.world.engine_temp,
            flag: self.flag,
            position: self.position,
            last_estop: self.last_estop.clone(),
            stamp: ctx.now,
        };
        ctx.publish(topics::TELEMETRY, Payload::Telemetry(msg))?;
        Ok(())
    }
}

/// Drive-by-wire boundary: applies commands to the plant and reports wheel
/// speed, engine state and hardware diagnostics.
pub struct RaptorDbwNode {
    rate_hz: f64,
    last_command: Option<SimTime>,
    timed_out: bool,
    fault: Option<(u32, Option<SimTime>)>,
    ticks: u64,
}

impl RaptorDbwNode {
    pub fn new(rate_hz: f64) -> Self {
        RaptorDbwNode {
            rate_hz,
            last_command: None,
            timed_out: false,
            fault: None,
            ticks: 0,
        }
    }

    fn diagnostic_code(&mut self, now: SimTime) -> u32 {
        match self.fault {
            Some((_, Some(until))) if now >= until => {
                self.fault = None;
                0
            }
            Some((code, _)) => code,
            None => 0,
        }
    }
}

impl Node for RaptorDbwNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "raptor_dbw",
            self.rate_hz,
            [topics::RAPTOR_COMMAND, topics::ENGINE_SHUTDOWN, topics::JOYSTICK],
            [topics::WHEEL_SPEED, topics::ENGINE_REPORT, topics::DIAGNOSTICS],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                Payload::Command(c) => {
                    self.last_command = Some(msg.stamp);
                    let mut accel = c.accelerator.clamp(0.0, 1.0);
                    let brake = c.brake.clamp(0.0, 1.0);
                    if accel > 0.0 && brake > 0.0 {
                        ctx.error("simultaneous_accel_brake", format!("accel={accel:.4} brake={brake:.4}"));
                        accel = 0.0;
                    }
                    let w = &mut ctx.world;
                    w.inputs.accel = accel;
                    w.inputs.brake = brake;
                    w.inputs.steer_deg = c.steering;
                    if c.gear >= w.params.min_gear && c.gear <= w.params.max_gear {
                        w.inputs.gear = c.gear;
                    }
                }
                Payload::EngineShutdown { cause } => {
                    if ctx.world.engine_on {
                        ctx.world.engine_on = false;
                        ctx.world.inputs.accel = 0.0;
                        ctx.halo("engine_off", format!("cause={cause}"));
                    }
                }
                // the hardware kill switch is wired straight to the joystick
                Payload::Joystick(j) if bumper_kill(&j) => {
                    if ctx.world.engine_on {
                        ctx.world.engine_on = false;
                        ctx.world.inputs.accel = 0.0;
                        ctx.halo("engine_off", "cause=bumper_kill");
                    }
                }
                _ => {}
            }
        }

        let silent = ctx.now.since(self.last_command.unwrap_or(SimTime::ZERO)) > DBW_COMMAND_TIMEOUT;
        if silent && !self.timed_out {
            self.timed_out = true;
            ctx.world.engine_on = false;
            ctx.world.inputs.accel = 0.0;
            ctx.world.inputs.brake = ctx.world.inputs.brake.max(DBW_TIMEOUT_BRAKE);
            ctx.halo("engine_off", "cause=command_timeout");
        }

        let ws = sample_wheel_speed(&ctx.world.ego, &ctx.world.noise, ctx.now, ctx.rng);
        ctx.publish(topics::WHEEL_SPEED, Payload::WheelSpeed(ws))?;
        if self.ticks % 10 == 0 {
            let report = EngineReport {
                rpm: if ctx.world.engine_on { ctx.world.engine_rpm() } else { 0.0 },
                gear: ctx.world.ego.gear,
                engine_on: ctx.world.engine_on,
                temp_c: ctx.world.engine_temp,
                stamp: ctx.now,
            };
            ctx.publish(topics::ENGINE_REPORT, Payload::Engine(report))?;
            let code = self.diagnostic_code(ctx.now);
            ctx.publish(topics::DIAGNOSTICS, Payload::Diagnostics(DiagnosticsReport::new(code, ctx.now)))?;
        }
        self.ticks += 1;
        Ok(())
    }

    fn apply_fault(&mut self, fault: &FaultKind, now: SimTime) -> bool {
        match fault {
            FaultKind::DiagnosticsError { code, duration_s } => {
                let until = duration_s.map(|d| now + SimDuration::from_secs_f64(d));
                self.fault = Some((*code, until));
                true
            }
            _ => false,
        }
    }
}
