use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Limit,
    Accuracy,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Limit => "limit",
            RejectReason::Accuracy => "accuracy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateDecision {
    Accept,
    Reject(RejectReason),
}

/// Range and accuracy gate in front of a consumer. Out-of-range values are
/// rejected first; in-range values are rejected if their reported accuracy
/// is worse than the threshold. NaN values never pass.
pub fn data_health_gate(value: f64, lower: f64, upper: f64, accuracy: f64, accuracy_threshold: f64) -> GateDecision {
    if !(value >= lower && value <= upper) {
        GateDecision::Reject(RejectReason::Limit)
    } else if !(accuracy <= accuracy_threshold) {
        GateDecision::Reject(RejectReason::Accuracy)
    } else {
        GateDecision::Accept
    }
}
