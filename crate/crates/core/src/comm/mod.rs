//! Race-control flags, the base-station link, telemetry and the
//! drive-by-wire boundary.

mod nodes;

use serde::{Deserialize, Serialize};

use crate::bus::SimTime;
use crate::halo::HaloError;
use crate::plant::{DeadArc, Link};

pub use nodes::{BaseStationNode, RaceFlagInputNode, RaptorDbwNode, TelemetryNode, DBW_COMMAND_TIMEOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagColor {
    Green,
    WavingGreen,
    Yellow,
    Red,
    Purple,
}

impl FlagColor {
    pub const ALL: [FlagColor; 5] = [
        FlagColor::Green,
        FlagColor::WavingGreen,
        FlagColor::Yellow,
        FlagColor::Red,
        FlagColor::Purple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlagColor::Green => "green",
            FlagColor::WavingGreen => "waving_green",
            FlagColor::Yellow => "yellow",
            FlagColor::Red => "red",
            FlagColor::Purple => "purple",
        }
    }

    pub fn parse(s: &str) -> Result<Self, HaloError> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| HaloError::UnknownFlagColor(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagOrigin {
    #[default]
    Mylaps,
    Spoofed,
}

impl FlagOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagOrigin::Mylaps => "mylaps",
            FlagOrigin::Spoofed => "spoofed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceFlag {
    pub color: FlagColor,
    pub origin: FlagOrigin,
    pub stamp: SimTime,
}

/// Operator joystick frame. Also serves as the base-station heartbeat.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JoystickMsg {
    pub accel: Option<f64>,
    pub brake: Option<f64>,
    pub steer: Option<f64>,
    pub bumper_left: bool,
    pub bumper_right: bool,
    pub counter: u64,
    pub stamp: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub ok: bool,
    pub code: u32,
    pub stamp: SimTime,
}

impl DiagnosticsReport {
    pub fn new(code: u32, stamp: SimTime) -> Self {
        DiagnosticsReport { ok: code == 0, code, stamp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryMsg {
    pub current_v: f64,
    pub desired_v: f64,
    pub lateral_error: f64,
    /// Scalar covariance of the last best odometry, m^2.
    pub localization_accuracy: f64,
    pub engine_temp: f64,
    pub flag: Option<FlagColor>,
    pub position: [f64; 2],
    pub last_estop: Option<String>,
    pub stamp: SimTime,
}

/// One entry of a scenario's flag schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagEvent {
    pub at_s: f64,
    pub color: FlagColor,
    #[serde(default)]
    pub origin: FlagOrigin,
}

/// Latest scheduled flag of `origin` at or before `now`.
pub fn scheduled_flag(schedule: &[FlagEvent], origin: FlagOrigin, now: SimTime) -> Option<FlagColor> {
    let t = now.as_secs_f64();
    schedule
        .iter()
        .filter(|f| f.origin == origin && f.at_s <= t)
        .max_by(|a, b| a.at_s.total_cmp(&b.at_s))
        .map(|f| f.color)
}

/// The MyLaps feed for one tick: the scheduled flag, or silence while the
/// car is inside a MyLaps dead arc.
pub fn flag_feed_tick(track_pos: f64, schedule: &[FlagEvent], coverage: &[DeadArc], now: SimTime) -> Option<RaceFlag> {
    if coverage.iter().any(|a| a.link == Link::Mylaps && a.covers(track_pos)) {
        return None;
    }
    scheduled_flag(schedule, FlagOrigin::Mylaps, now).map(|color| RaceFlag {
        color,
        origin: FlagOrigin::Mylaps,
        stamp: now,
    })
}

/// Both bumpers in the same frame kill the engine.
pub fn bumper_kill(msg: &JoystickMsg) -> bool {
    msg.bumper_left && msg.bumper_right
}

/// A scheduled operator input, held from `at_s` until `until_s` (or for a
/// single frame when `until_s` is absent).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct JoystickEvent {
    pub at_s: f64,
    pub until_s: Option<f64>,
    pub accel: Option<f64>,
    pub brake: Option<f64>,
    pub steer: Option<f64>,
    pub bumper_left: bool,
    pub bumper_right: bool,
}

impl JoystickEvent {
    fn active(&self, t: f64, period: f64) -> bool {
        let until = self.until_s.unwrap_or(self.at_s + period);
        t >= self.at_s && t < until
    }
}
