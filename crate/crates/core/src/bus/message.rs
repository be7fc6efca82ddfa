use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BusError, SimTime};
use crate::comm::{DiagnosticsReport, JoystickMsg, RaceFlag, TelemetryMsg};
use crate::control::ActuatorCommand;
use crate::halo::StopReason;
use crate::localization::{GnssFix, LocalPose};
use crate::perception::Detection;
use crate::plant::{EngineReport, ImuSample, WheelSpeed};

/// Every value that can travel on the bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Heartbeat { counter: u64 },
    Gnss(GnssFix),
    Imu(ImuSample),
    WheelSpeed(WheelSpeed),
    Engine(EngineReport),
    Diagnostics(DiagnosticsReport),
    Flag(RaceFlag),
    Joystick(JoystickMsg),
    Telemetry(TelemetryMsg),
    Pose(LocalPose),
    NoOdometry,
    Command(ActuatorCommand),
    Steering { degrees: f64 },
    DesiredVelocity { mps: f64 },
    DesiredPath { name: String },
    StopFlag { stop: bool, reason: Option<StopReason> },
    StopRequest { reason: String },
    BrakeOverride { level: f64 },
    EngineShutdown { cause: String },
    Notification { text: String },
    Detection(Detection),
    ControlStatus { desired_mps: f64, latched: bool },
}

/// Payload discriminant, used to type topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PayloadKind {
    Heartbeat,
    Gnss,
    Imu,
    WheelSpeed,
    Engine,
    Diagnostics,
    Flag,
    Joystick,
    Telemetry,
    Pose,
    NoOdometry,
    Command,
    Steering,
    DesiredVelocity,
    DesiredPath,
    StopFlag,
    StopRequest,
    BrakeOverride,
    EngineShutdown,
    Notification,
    Detection,
    ControlStatus,
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Heartbeat { .. } => PayloadKind::Heartbeat,
            Payload::Gnss(_) => PayloadKind::Gnss,
            Payload::Imu(_) => PayloadKind::Imu,
            Payload::WheelSpeed(_) => PayloadKind::WheelSpeed,
            Payload::Engine(_) => PayloadKind::Engine,
            Payload::Diagnostics(_) => PayloadKind::Diagnostics,
            Payload::Flag(_) => PayloadKind::Flag,
            Payload::Joystick(_) => PayloadKind::Joystick,
            Payload::Telemetry(_) => PayloadKind::Telemetry,
            Payload::Pose(_) => PayloadKind::Pose,
            Payload::NoOdometry => PayloadKind::NoOdometry,
            Payload::Command(_) => PayloadKind::Command,
            Payload::Steering { .. } => PayloadKind::Steering,
            Payload::DesiredVelocity { .. } => PayloadKind::DesiredVelocity,
            Payload::DesiredPath { .. } => PayloadKind::DesiredPath,
            Payload::StopFlag { .. } => PayloadKind::StopFlag,
            Payload::StopRequest { .. } => PayloadKind::StopRequest,
            Payload::BrakeOverride { .. } => PayloadKind::BrakeOverride,
            Payload::EngineShutdown { .. } => PayloadKind::EngineShutdown,
            Payload::Notification { .. } => PayloadKind::Notification,
            Payload::Detection(_) => PayloadKind::Detection,
            Payload::ControlStatus { .. } => PayloadKind::ControlStatus,
        }
    }

    /// Compact `k=v` rendering with fixed precision, so traces diff cleanly.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        match self {
            Payload::Heartbeat { counter } => kv(w, "counter", counter),
            Payload::Gnss(f) => {
                kv(w, "unit", f.unit.as_str());
                kv(w, "lat", format!("{:.9}", f.lat));
                kv(w, "lon", format!("{:.9}", f.lon));
                kv(w, "lat_stddev", format!("{:.6}", f.lat_stddev));
                kv(w, "lon_stddev", format!("{:.6}", f.lon_stddev));
            }
            Payload::Imu(i) => {
                kv(w, "accel", format!("{:.4}", i.accel));
                kv(w, "yaw_rate", format!("{:.5}", i.yaw_rate));
            }
            Payload::WheelSpeed(ws) => kv(w, "speed", format!("{:.3}", ws.speed)),
            Payload::Engine(e) => {
                kv(w, "rpm", format!("{:.0}", e.rpm));
                kv(w, "gear", e.gear);
                kv(w, "engine_on", e.engine_on);
                kv(w, "temp", format!("{:.1}", e.temp_c));
            }
            Payload::Diagnostics(d) => {
                kv(w, "ok", d.ok);
                kv(w, "code", d.code);
            }
            Payload::Flag(f) => {
                kv(w, "color", f.color.as_str());
                kv(w, "origin", f.origin.as_str());
            }
            Payload::Joystick(j) => {
                kv(w, "counter", j.counter);
                if let Some(a) = j.accel {
                    kv(w, "accel", format!("{a:.3}"));
                }
                if let Some(b) = j.brake {
                    kv(w, "brake", format!("{b:.3}"));
                }
                if let Some(st) = j.steer {
                    kv(w, "steer", format!("{st:.3}"));
                }
                kv(w, "bumper_left", j.bumper_left);
                kv(w, "bumper_right", j.bumper_right);
            }
            Payload::Telemetry(t) => {
                kv(w, "v", format!("{:.3}", t.current_v));
                kv(w, "desired", format!("{:.3}", t.desired_v));
                kv(w, "lat_err", format!("{:.3}", t.lateral_error));
                kv(w, "accuracy", format!("{:.6}", t.localization_accuracy));
                kv(w, "temp", format!("{:.1}", t.engine_temp));
                kv(w, "flag", t.flag.map(|c| c.as_str()).unwrap_or("none"));
                kv(w, "estop", t.last_estop.as_deref().unwrap_or("none"));
            }
            Payload::Pose(p) => {
                kv(w, "source", p.source.as_str());
                kv(w, "x", format!("{:.3}", p.x));
                kv(w, "y", format!("{:.3}", p.y));
                kv(w, "heading", format!("{:.4}", p.heading));
                kv(w, "cov", format!("{:.6}", p.scalar_cov));
            }
            Payload::NoOdometry => kv(w, "no_odometry", true),
            Payload::Command(c) => {
                kv(w, "accel", format!("{:.4}", c.accelerator));
                kv(w, "brake", format!("{:.4}", c.brake));
                kv(w, "steering", format!("{:.4}", c.steering));
                kv(w, "gear", c.gear);
            }
            Payload::Steering { degrees } => kv(w, "degrees", format!("{degrees:.4}")),
            Payload::DesiredVelocity { mps } => kv(w, "mps", format!("{mps:.4}")),
            Payload::DesiredPath { name } => kv(w, "path", name),
            Payload::StopFlag { stop, reason } => {
                kv(w, "stop", stop);
                kv(w, "reason", reason.map(|r| r.as_str()).unwrap_or("none"));
            }
            Payload::StopRequest { reason } => kv(w, "reason", reason),
            Payload::BrakeOverride { level } => kv(w, "level", format!("{level:.3}")),
            Payload::EngineShutdown { cause } => kv(w, "cause", cause),
            Payload::Notification { text } => kv(w, "text", text),
            Payload::Detection(d) => {
                kv(w, "separation", format!("{:.3}", d.separation));
                kv(w, "truth", d.kind.as_str());
            }
            Payload::ControlStatus {
                desired_mps,
                latched,
            } => {
                kv(w, "desired", format!("{desired_mps:.4}"));
                kv(w, "latched", latched);
            }
        }
        s
    }

    /// Overwrites one numeric field in place. Used by value-corruption
    /// faults; the field names match those in [`Payload::summary`].
    pub fn set_field(&mut self, field: &str, value: f64) -> Result<(), BusError> {
        let slot: &mut f64 = match (self, field) {
            (Payload::Pose(p), "x") => &mut p.x,
            (Payload::Pose(p), "y") => &mut p.y,
            (Payload::Pose(p), "heading") => &mut p.heading,
            (Payload::Pose(p), "cov") => {
                p.cov = [[value, 0.0], [0.0, value]];
                p.scalar_cov = value;
                return Ok(());
            }
            (Payload::Gnss(f), "lat") => &mut f.lat,
            (Payload::Gnss(f), "lon") => &mut f.lon,
            (Payload::Gnss(f), "lat_stddev") => &mut f.lat_stddev,
            (Payload::Gnss(f), "lon_stddev") => &mut f.lon_stddev,
            (Payload::Gnss(f), "stddev") => {
                f.lat_stddev = value;
                f.lon_stddev = value;
                return Ok(());
            }
            (Payload::WheelSpeed(ws), "speed") => &mut ws.speed,
            (Payload::Imu(i), "accel") => &mut i.accel,
            (Payload::Imu(i), "yaw_rate") => &mut i.yaw_rate,
            (Payload::Command(c), "accel") => &mut c.accelerator,
            (Payload::Command(c), "brake") => &mut c.brake,
            (Payload::Command(c), "steering") => &mut c.steering,
            (Payload::Command(c), "gear") => {
                c.gear = value.round().clamp(0.0, 255.0) as u8;
                return Ok(());
            }
            (Payload::Steering { degrees }, "degrees") => degrees,
            (Payload::DesiredVelocity { mps }, "mps") => mps,
            (Payload::Detection(d), "separation") => &mut d.separation,
            (Payload::BrakeOverride { level }, "level") => level,
            (Payload::Heartbeat { counter }, "counter") => {
                *counter = value.max(0.0) as u64;
                return Ok(());
            }
            (Payload::Diagnostics(d), "code") => {
                d.code = value.max(0.0) as u32;
                d.ok = d.code == 0;
                return Ok(());
            }
            (p, f) => {
                return Err(BusError::UnknownField {
                    kind: p.kind(),
                    field: f.to_string(),
                })
            }
        };
        *slot = value;
        Ok(())
    }
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    if !out.is_empty() {
        out.push(' ');
    }
    let _ = write!(out, "{key}={value}");
}

/// Parses a `k=v k=v` summary back into pairs.
pub fn parse_summary(summary: &str) -> impl Iterator<Item = (&str, &str)> {
    summary.split(' ').filter_map(|tok| tok.split_once('='))
}

/// A timestamped, sequence-numbered payload on a named topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMessage {
    pub topic: String,
    pub seq: u64,
    pub stamp: SimTime,
    pub publisher: String,
    pub payload: Payload,
}
