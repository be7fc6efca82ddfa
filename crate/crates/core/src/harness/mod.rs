//! Scenarios, fault injection, trace assertions and metrics.

mod assert;
mod fault;
mod fmeca;
mod metrics;
mod runner;
mod scenario;

use thiserror::Error;

pub use assert::{assert_trace, parse_predicate, AssertOutcome, AssertReport, Matcher, Predicate, PredicateError};
pub use fault::{FaultClass, FaultKind, FaultSpec};
pub use fmeca::{fmeca_criticality, fmeca_table, Criticality, FmecaEntry, Probability, Severity};
pub use metrics::{compute_metrics, rate_between, MergeRecord, MetricsReport, Mitigation, MuxSwitch, StopEvent};
pub use runner::{run_scenario, RunOutput, DEFAULT_RATES};
pub use scenario::{
    AssertSpec, ControlSettings, EgoSettings, HaloSettings, OpponentSettings, Scenario, DISABLEABLE_HALO_NODES,
};

/// A scenario that failed to parse or validate, with the offending field.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}
