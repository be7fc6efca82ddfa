//! Ground truth: vehicle dynamics, track geometry and sensor sampling.

mod sensors;
mod track;
mod vehicle;
mod world;

use thiserror::Error;

pub use sensors::{
    sample_gnss, sample_imu, sample_wheel_speed, EngineReport, GnssDropout, GnssNode, ImuNode, ImuSample,
    SensorNoiseModel, WheelSpeed,
};
pub use track::{
    CenterlineSpec, DeadArc, Link, Path, PathSpec, Point, Polygon, Projection, TrackConfig, TrackModel,
};
pub use vehicle::{engine_rpm, normalize_angle, step_dynamics, VehicleParams, VehicleState, RPM_PER_MPS};
pub use world::{DriveInputs, Opponent, World};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("accelerator {accel} and brake {brake} commanded together")]
    SimultaneousAccelBrake { accel: f64, brake: f64 },
    #[error("integration step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("point lies in both {first} and {second}")]
    AmbiguousRegion { first: String, second: String },
    #[error("invalid track: {0}")]
    BadTrack(String),
    #[error("sensor stddev {name} must be non-negative, got {value}")]
    NegativeStddev { name: &'static str, value: f64 },
}
