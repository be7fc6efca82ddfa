//! The safety layer: graceful stop, node health monitor, topic multiplexer
//! and the behavioral monitor hosted in the SSC interface.

mod behavior;
mod gate;
mod health;
mod mux;
mod nodes;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use behavior::{
    close_the_door, flag_transition, region_transition, DoorConfig, DoorWindow, FlagDecision, Region, SpeedTable,
};
pub use gate::{data_health_gate, GateDecision, RejectReason};
pub use health::{escalate, gs_check, nh_on_heartbeat, nh_tick, ChannelRecord, GsThresholds, HealthLedger, NodeRecord, MONITORED_NODES};
pub use mux::{mux_select, EkfPassthroughNode, MuxConfig, MuxOutput, MuxState, TopicMultiplexerNode};
pub use nodes::{GracefulStopNode, NodeHealthMonitorNode, SscInterfaceNode, SscLimits};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HaloError {
    #[error("heartbeat counter of {node} went backwards from {previous} to {got}")]
    CounterRegression { node: String, previous: u64, got: u64 },
    #[error("unknown flag color {0}")]
    UnknownFlagColor(String),
    #[error("door window needs 0 < n <= k, got n={n} k={k}")]
    InvalidDoorWindow { n: usize, k: usize },
}

/// Why the graceful stop node asked for a stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Diagnostics,
    GnssSilence,
    GnssInaccurate,
    BasestationTimeout,
    MylapsTimeout,
    NoOdometry,
    NodeHealthRequest,
    MonitorLost,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Diagnostics => "diagnostics",
            StopReason::GnssSilence => "gnss_silence",
            StopReason::GnssInaccurate => "gnss_inaccurate",
            StopReason::BasestationTimeout => "basestation_timeout",
            StopReason::MylapsTimeout => "mylaps_timeout",
            StopReason::NoOdometry => "no_odometry",
            StopReason::NodeHealthRequest => "node_health_request",
            StopReason::MonitorLost => "monitor_lost",
        }
    }

    /// Hardware faults need a person; everything else may clear on its own.
    pub fn recoverable(self) -> bool {
        self != StopReason::Diagnostics
    }
}

/// Escalation chosen by the node health monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HaloAction {
    TakeOverMux,
    NotifyOperator,
    RequestGracefulStop,
    PublishZeroVelocity,
    DirectBrake(f64),
    EngineShutdown,
}

impl HaloAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaloAction::TakeOverMux => "take_over_mux",
            HaloAction::NotifyOperator => "notify_operator",
            HaloAction::RequestGracefulStop => "request_graceful_stop",
            HaloAction::PublishZeroVelocity => "publish_zero_velocity",
            HaloAction::DirectBrake(_) => "direct_brake",
            HaloAction::EngineShutdown => "engine_shutdown",
        }
    }
}
