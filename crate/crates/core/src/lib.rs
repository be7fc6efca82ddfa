//! Deterministic discrete-event simulation of an autonomous race-car
//! software stack and its runtime safety layer.
//!
//! The crate is organised by subsystem:
//!
//! - [`bus`]: virtual clock, publish/subscribe topics, node scheduler, trace.
//! - [`plant`]: vehicle dynamics, track geometry, sensor sampling.
//! - [`localization`]: geodetic projection, heading, EKF fusion.
//! - [`control`]: longitudinal PID pair, gears, pure pursuit.
//! - [`comm`]: race flags, base-station link, telemetry, drive-by-wire.
//! - [`perception`]: synthetic opponent detections.
//! - [`halo`]: graceful stop, node health monitor, topic multiplexer,
//!   behavioral monitor.
//! - [`harness`]: scenarios, fault injection, trace assertions, metrics.
//!
//! ```
//! use halo_sim::harness::{run_scenario, Scenario};
//!
//! let mut sc = Scenario::baseline("smoke", 1.0);
//! sc.asserts.clear();
//! let out = run_scenario(&sc).unwrap();
//! assert!(out.metrics.stop_events.is_empty());
//! ```

pub mod bus;
pub mod comm;
pub mod control;
mod error;
pub mod halo;
pub mod harness;
pub mod localization;
pub mod perception;
pub mod plant;

pub use error::SimError;

/// Miles per hour to meters per second, exact by definition.
pub const MPH: f64 = 0.44704;
