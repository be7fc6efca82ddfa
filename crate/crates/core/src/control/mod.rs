//! Longitudinal and lateral control with their built-in safety clamps.

mod gear;
mod latch;
mod nodes;
mod pid;
mod pursuit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::SimTime;

pub use gear::{select_gear, GearConfig};
pub use latch::{apply_graceful_latch, GracefulLatch, LATCH_RESET};
pub use nodes::{LongControlNode, PathTrackerNode};
pub use pid::{long_control_tick, LongControlConfig, PidState};
pub use pursuit::{
    lookahead_distance, max_steering_angle, pure_pursuit_steer, PathSet, HIGH_SPEED_BREAKPOINT, LOW_SPEED_BREAKPOINT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("path has no waypoints")]
    EmptyPath,
    #[error("unknown path {0}")]
    UnknownPath(String),
}

/// Pedal, steering and gear command sent towards the drive-by-wire layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub accelerator: f64,
    pub brake: f64,
    /// Degrees, positive turns right.
    pub steering: f64,
    pub gear: u8,
    pub stamp: SimTime,
}
