use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::plant::Link;

/// The three fault families the safety layer is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    NodeHealth,
    DataHealth,
    BehavioralSafety,
}

impl FaultClass {
    pub const ALL: [FaultClass; 3] = [FaultClass::NodeHealth, FaultClass::DataHealth, FaultClass::BehavioralSafety];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultClass::NodeHealth => "node_health",
            FaultClass::DataHealth => "data_health",
            FaultClass::BehavioralSafety => "behavioral_safety",
        }
    }

    /// Safety-layer actions that count as mitigating a fault of this class.
    pub fn mitigating_actions(self) -> &'static [&'static str] {
        match self {
            FaultClass::NodeHealth => &[
                "take_over_mux",
                "notify_operator",
                "request_graceful_stop",
                "publish_zero_velocity",
                "direct_brake",
                "engine_shutdown",
                "graceful_stop",
            ],
            FaultClass::DataHealth => &["mux_switch", "graceful_stop", "gate_reject"],
            FaultClass::BehavioralSafety => &["merge", "engine_shutdown"],
        }
    }
}

/// What to break. Times are seconds of simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    /// `node` may also name a group: `localization` is the EKF plus both
    /// map-baselink projections.
    NodeCrash { node: String },
    NodeStall { node: String, duration_s: f64 },
    TopicDrop { topic: String, duration_s: f64 },
    MessageDelay { topic: String, delay_ms: u64, duration_s: f64 },
    /// Overwrites `field` of every message on `topic`; permanent without a
    /// duration.
    ValueCorrupt {
        topic: String,
        field: String,
        value: f64,
        duration_s: Option<f64>,
    },
    /// Inflates the published EKF covariance, either by a factor or up to a
    /// target scalar value, ramping over `ramp_s`.
    CovInflate {
        factor: Option<f64>,
        target_cov: Option<f64>,
        #[serde(default)]
        ramp_s: f64,
    },
    DetectionBurst { fn_rate: f64, fp_rate: f64, duration_s: f64 },
    /// Adds a coverage hole for `link` between two centerline arclengths.
    RadioDeadArc { link: Link, from_m: f64, to_m: f64 },
    DiagnosticsError { code: u32, duration_s: Option<f64> },
}

impl FaultKind {
    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::NodeCrash { .. } => "node_crash",
            FaultKind::NodeStall { .. } => "node_stall",
            FaultKind::TopicDrop { .. } => "topic_drop",
            FaultKind::MessageDelay { .. } => "message_delay",
            FaultKind::ValueCorrupt { .. } => "value_corrupt",
            FaultKind::CovInflate { .. } => "cov_inflate",
            FaultKind::DetectionBurst { .. } => "detection_burst",
            FaultKind::RadioDeadArc { .. } => "radio_dead_arc",
            FaultKind::DiagnosticsError { .. } => "diagnostics_error",
        }
    }

    pub fn class(&self) -> FaultClass {
        match self {
            FaultKind::NodeCrash { .. } | FaultKind::NodeStall { .. } => FaultClass::NodeHealth,
            FaultKind::DetectionBurst { .. } => FaultClass::BehavioralSafety,
            FaultKind::TopicDrop { .. }
            | FaultKind::MessageDelay { .. }
            | FaultKind::ValueCorrupt { .. }
            | FaultKind::CovInflate { .. }
            | FaultKind::RadioDeadArc { .. }
            | FaultKind::DiagnosticsError { .. } => FaultClass::DataHealth,
        }
    }

    /// Node or topic the fault is aimed at, for the trace.
    pub fn target(&self) -> String {
        match self {
            FaultKind::NodeCrash { node } | FaultKind::NodeStall { node, .. } => node.clone(),
            FaultKind::TopicDrop { topic, .. }
            | FaultKind::MessageDelay { topic, .. }
            | FaultKind::ValueCorrupt { topic, .. } => topic.clone(),
            FaultKind::CovInflate { .. } => "ekf".into(),
            FaultKind::DetectionBurst { .. } => "lidar".into(),
            FaultKind::RadioDeadArc { link, .. } => crate::bus::link_name(*link).into(),
            FaultKind::DiagnosticsError { .. } => "raptor_dbw".into(),
        }
    }

    /// `k=v` description for the trace, starting with the class.
    pub fn summary(&self) -> String {
        let mut s = format!("class={}", self.class().as_str());
        let opt = |v: &Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let _ = match self {
            FaultKind::NodeCrash { node } => write!(s, " node={node}"),
            FaultKind::NodeStall { node, duration_s } => write!(s, " node={node} duration_s={duration_s}"),
            FaultKind::TopicDrop { topic, duration_s } => write!(s, " topic={topic} duration_s={duration_s}"),
            FaultKind::MessageDelay {
                topic,
                delay_ms,
                duration_s,
            } => write!(s, " topic={topic} delay_ms={delay_ms} duration_s={duration_s}"),
            FaultKind::ValueCorrupt {
                topic,
                field,
                value,
                duration_s,
            } => write!(s, " topic={topic} field={field} value={value} duration_s={}", opt(duration_s)),
            FaultKind::CovInflate {
                factor,
                target_cov,
                ramp_s,
            } => write!(s, " factor={} target_cov={} ramp_s={ramp_s}", opt(factor), opt(target_cov)),
            FaultKind::DetectionBurst {
                fn_rate,
                fp_rate,
                duration_s,
            } => write!(s, " fn_rate={fn_rate} fp_rate={fp_rate} duration_s={duration_s}"),
            FaultKind::RadioDeadArc { link, from_m, to_m } => {
                write!(s, " link={} from_m={from_m} to_m={to_m}", crate::bus::link_name(*link))
            }
            FaultKind::DiagnosticsError { code, duration_s } => {
                write!(s, " code={code} duration_s={}", opt(duration_s))
            }
        };
        s
    }
}

/// A fault and when it strikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub at_s: f64,
    #[serde(flatten)]
    pub kind: FaultKind,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_from_toml() {
        #[derive(Deserialize)]
        struct W {
            fault: Vec<FaultSpec>,
        }
        let w: W = toml::from_str(
            r#"
            [[fault]]
            at_s = 10.0
            kind = "node_crash"
            node = "topic_multiplexer"

            [[fault]]
            at_s = 5.0
            kind = "cov_inflate"
            target_cov = 0.12385
            ramp_s = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(
            w.fault[0].kind,
            FaultKind::NodeCrash {
                node: "topic_multiplexer".into()
            }
        );
        assert_eq!(
            w.fault[1].kind,
            FaultKind::CovInflate {
                factor: None,
                target_cov: Some(0.12385),
                ramp_s: 0.5
            }
        );
    }

    #[test]
    fn every_kind_has_one_class() {
        let kinds = [
            FaultKind::NodeCrash { node: "a".into() },
            FaultKind::NodeStall {
                node: "a".into(),
                duration_s: 1.0,
            },
            FaultKind::TopicDrop {
                topic: "t".into(),
                duration_s: 1.0,
            },
            FaultKind::DetectionBurst {
                fn_rate: 0.1,
                fp_rate: 0.1,
                duration_s: 1.0,
            },
            FaultKind::DiagnosticsError {
                code: 3,
                duration_s: None,
            },
        ];
        let classes: Vec<_> = kinds.iter().map(FaultKind::class).collect();
        assert_eq!(
            classes,
            [
                FaultClass::NodeHealth,
                FaultClass::NodeHealth,
                FaultClass::DataHealth,
                FaultClass::BehavioralSafety,
                FaultClass::DataHealth
            ]
        );
        for k in &kinds {
            assert!(k.summary().starts_with(&format!("class={}", k.class().as_str())));
        }
    }
}
