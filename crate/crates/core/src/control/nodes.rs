use std::collections::BTreeMap;

use super::{
    apply_graceful_latch, long_control_tick, pure_pursuit_steer, select_gear, ActuatorCommand, GearConfig, GracefulLatch,
    LongControlConfig, PathSet, PidState,
};
use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimDuration, SimTime};
use crate::comm::JoystickMsg;
use crate::localization::LocalPose;
use crate::plant::Point;
use crate::SimError;

/// Joystick overrides older than this are ignored.
pub const JOYSTICK_FRESHNESS: SimDuration = SimDuration::from_millis(200);

pub struct LongControlNode {
    rate_hz: f64,
    cfg: LongControlConfig,
    gears: GearConfig,
    pid_a: PidState,
    pid_b: PidState,
    latch: GracefulLatch,
    desired_in: f64,
    current_v: f64,
    rpm: f64,
    gear: u8,
    joystick: Option<JoystickMsg>,
    shutdown: bool,
    counter: u64,
}

impl LongControlNode {
    pub fn new(rate_hz: f64, cfg: LongControlConfig, gears: GearConfig, initial_speed: f64, gear: u8) -> Self {
        let (pid_a, pid_b) = cfg.pids();
        LongControlNode {
            rate_hz,
            cfg,
            gears,
            pid_a,
            pid_b,
            latch: GracefulLatch::default(),
            // hold the starting speed until race control says otherwise
            desired_in: initial_speed,
            current_v: initial_speed,
            rpm: 0.0,
            gear,
            joystick: None,
            shutdown: false,
            counter: 0,
        }
    }

    fn joystick_override(&self, now: SimTime) -> Option<(f64, f64)> {
        let j = self.joystick.as_ref()?;
        if now.since(j.stamp) > JOYSTICK_FRESHNESS || (j.accel.is_none() && j.brake.is_none()) {
            return None;
        }
        let brake = j.brake.unwrap_or(0.0).clamp(0.0, 1.0);
        let accel = if brake > 0.0 { 0.0 } else { j.accel.unwrap_or(0.0).clamp(0.0, 1.0) };
        Some((accel, brake))
    }
}

impl Node for LongControlNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "long_control",
            self.rate_hz,
            vec![
                topics::DESIRED_VELOCITY.to_string(),
                topics::GRACEFUL_STOP_FLAG.to_string(),
                topics::JOYSTICK.to_string(),
                topics::WHEEL_SPEED.to_string(),
                topics::ENGINE_REPORT.to_string(),
                topics::ENGINE_SHUTDOWN.to_string(),
            ],
            vec![
                topics::LONG_COMMAND.to_string(),
                topics::LONG_STATUS.to_string(),
                topics::heartbeat("long_control"),
            ],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let was_latched = self.latch.engaged;
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                Payload::DesiredVelocity { mps } => self.desired_in = mps.max(0.0),
                Payload::StopFlag { stop: true, reason } => self.latch.on_stop_flag(reason, msg.stamp),
                Payload::Joystick(j) => self.joystick = Some(j),
                Payload::WheelSpeed(w) => self.current_v = w.speed,
                Payload::Engine(e) => self.rpm = e.rpm,
                Payload::EngineShutdown { .. } => self.shutdown = true,
                _ => {}
            }
        }
        let desired = apply_graceful_latch(self.desired_in, &mut self.latch, ctx.now);
        if self.latch.engaged && !was_latched {
            let reason = self.latch.reason.map(|r| r.as_str()).unwrap_or("none");
            ctx.halo("latch_engaged", format!("reason={reason}"));
        } else if was_latched && !self.latch.engaged {
            ctx.halo("latch_released", String::new());
        }

        let dt = 1.0 / self.rate_hz;
        let mut cmd = if self.shutdown {
            self.pid_a.reset();
            self.pid_b.reset();
            ActuatorCommand {
                brake: 1.0,
                ..ActuatorCommand::default()
            }
        } else if let Some((accelerator, brake)) = self.joystick_override(ctx.now) {
            ActuatorCommand {
                accelerator,
                brake,
                ..ActuatorCommand::default()
            }
        } else {
            long_control_tick(self.current_v, desired, dt, &mut self.pid_a, &mut self.pid_b, &self.cfg)
        };
        self.gear = select_gear(self.rpm, self.current_v, self.gear, &self.gears);
        cmd.gear = self.gear;
        cmd.stamp = ctx.now;

        ctx.publish(topics::LONG_COMMAND, Payload::Command(cmd))?;
        ctx.publish(
            topics::LONG_STATUS,
            Payload::ControlStatus {
                desired_mps: desired,
                latched: self.latch.engaged,
            },
        )?;
        self.counter += 1;
        ctx.publish(&topics::heartbeat("long_control"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }
}

pub struct PathTrackerNode {
    rate_hz: f64,
    paths: PathSet,
    wheelbase: f64,
    pose: Option<LocalPose>,
    speed: f64,
    counter: u64,
}

impl PathTrackerNode {
    pub fn new(rate_hz: f64, paths: BTreeMap<String, Vec<Point>>, active: &str, wheelbase: f64, initial_speed: f64) -> Result<Self, SimError> {
        Ok(PathTrackerNode {
            rate_hz,
            paths: PathSet::new(paths, active)?,
            wheelbase,
            pose: None,
            speed: initial_speed,
            counter: 0,
        })
    }
}

impl Node for PathTrackerNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "path_tracker",
            self.rate_hz,
            vec![
                topics::BEST_ODOMETRY.to_string(),
                topics::DESIRED_PATH.to_string(),
                topics::WHEEL_SPEED.to_string(),
            ],
            vec![topics::STEERING.to_string(), topics::heartbeat("path_tracker")],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        for msg in std::mem::take(&mut ctx.inbox) {
            match msg.payload {
                Payload::Pose(p) => self.pose = Some(p),
                Payload::WheelSpeed(w) => self.speed = w.speed,
                Payload::DesiredPath { name } => {
                    if let Err(e) = self.paths.switch_path(&name) {
                        ctx.error("switch_path", e.to_string());
                    }
                }
                _ => {}
            }
        }
        let degrees = match self.pose {
            Some(p) => {
                // dead-reckon the last pose forward to now
                let age = ctx.now.since(p.stamp).as_secs_f64();
                let mut est = p;
                est.x += self.speed * p.heading.cos() * age;
                est.y += self.speed * p.heading.sin() * age;
                pure_pursuit_steer(&est, self.paths.active_points(), self.speed, self.wheelbase)?
            }
            None => 0.0,
        };
        ctx.publish(topics::STEERING, Payload::Steering { degrees })?;
        self.counter += 1;
        ctx.publish(&topics::heartbeat("path_tracker"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }
}
