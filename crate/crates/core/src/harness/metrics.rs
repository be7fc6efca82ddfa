use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FaultClass;
use crate::bus::{EventKind, Trace, TraceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuxSwitch {
    pub t_s: f64,
    pub node: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopEvent {
    pub t_s: f64,
    pub reason: String,
    pub recoverable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub t_s: f64,
    /// Ground-truth separation when the merge fired; negative means the
    /// ego was ahead.
    pub true_sep: Option<f64>,
    pub hits: usize,
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mitigation {
    pub fault: String,
    pub class: FaultClass,
    pub target: String,
    pub at_s: f64,
    /// First safety-layer action of the matching class after the fault.
    pub action: Option<String>,
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Mean publish rate over the whole run, Hz.
    pub topic_rates: BTreeMap<String, f64>,
    pub mux_timeline: Vec<MuxSwitch>,
    pub stop_events: Vec<StopEvent>,
    pub merges: Vec<MergeRecord>,
    /// Smallest lead the ego had over the opponent at any merge, m.
    pub min_lead_at_merge: Option<f64>,
    pub mitigations: Vec<Mitigation>,
    /// Mitigation latencies in seconds, keyed by fault class.
    pub mitigation_by_class: BTreeMap<String, Vec<f64>>,
    pub max_lateral_error: f64,
    pub final_speed: f64,
    pub gate_rejects: usize,
    pub errors: usize,
}

/// Publishes per second on `topic` over `[from_s, to_s)`.
pub fn rate_between(trace: &Trace, topic: &str, from_s: f64, to_s: f64) -> f64 {
    let n = trace
        .publishes_on(topic)
        .filter(|e| {
            let t = e.t_s();
            t >= from_s && t < to_s
        })
        .count();
    n as f64 / (to_s - from_s)
}

fn field_f64(e: &TraceEvent, key: &str) -> Option<f64> {
    e.field_f64(key)
}

pub fn compute_metrics(trace: &Trace, scenario: &str, seed: u64, duration_s: f64) -> MetricsReport {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in trace.of_kind(EventKind::Publish) {
        *counts.entry(e.topic.clone()).or_default() += 1;
    }
    let topic_rates = counts.into_iter().map(|(t, n)| (t, n as f64 / duration_s)).collect();

    let mux_timeline = trace
        .halo_actions("mux_switch")
        .map(|e| MuxSwitch {
            t_s: e.t_s(),
            node: e.node.clone(),
            from: e.field("from").unwrap_or("none").to_string(),
            to: e.field("to").unwrap_or("none").to_string(),
        })
        .collect();

    let stop_events = trace
        .halo_actions("graceful_stop")
        .map(|e| StopEvent {
            t_s: e.t_s(),
            reason: e.field("reason").unwrap_or("unknown").to_string(),
            recoverable: e.field("recoverable") == Some("true"),
        })
        .collect();

    let truths: Vec<&TraceEvent> = trace.of_kind(EventKind::Truth).collect();
    let truth_at = |t_ns: u64| truths.iter().find(|e| e.t_ns >= t_ns).copied();

    let merges: Vec<MergeRecord> = trace
        .halo_actions("merge")
        .map(|e| MergeRecord {
            t_s: e.t_s(),
            true_sep: truth_at(e.t_ns).and_then(|t| field_f64(t, "true_sep")),
            hits: field_f64(e, "hits").unwrap_or(0.0) as usize,
            n: field_f64(e, "n").unwrap_or(0.0) as usize,
            k: field_f64(e, "k").unwrap_or(0.0) as usize,
        })
        .collect();
    let min_lead_at_merge = merges
        .iter()
        .filter_map(|m| m.true_sep.map(|s| -s))
        .min_by(f64::total_cmp);

    let halos: Vec<&TraceEvent> = trace.of_kind(EventKind::Halo).collect();
    let mut mitigations = Vec::new();
    let mut mitigation_by_class: BTreeMap<String, Vec<f64>> =
        FaultClass::ALL.iter().map(|c| (c.as_str().to_string(), Vec::new())).collect();
    for f in trace.of_kind(EventKind::Fault) {
        let class = match f.field("class") {
            Some("node_health") => FaultClass::NodeHealth,
            Some("behavioral_safety") => FaultClass::BehavioralSafety,
            _ => FaultClass::DataHealth,
        };
        let actions = class.mitigating_actions();
        let first = halos
            .iter()
            .find(|h| h.t_ns >= f.t_ns && actions.contains(&h.topic.as_str()));
        let latency_s = first.map(|h| (h.t_ns - f.t_ns) as f64 * 1e-9);
        if let Some(l) = latency_s {
            mitigation_by_class.entry(class.as_str().to_string()).or_default().push(l);
        }
        mitigations.push(Mitigation {
            fault: f.topic.clone(),
            class,
            target: f.node.clone(),
            at_s: f.t_s(),
            action: first.map(|h| h.topic.clone()),
            latency_s,
        });
    }

    let max_lateral_error = truths
        .iter()
        .filter_map(|e| field_f64(e, "lat_err"))
        .fold(0.0, f64::max);
    let final_speed = truths.last().and_then(|e| field_f64(e, "speed")).unwrap_or(0.0);

    MetricsReport {
        scenario: scenario.to_string(),
        seed,
        duration_s,
        topic_rates,
        mux_timeline,
        stop_events,
        merges,
        min_lead_at_merge,
        mitigations,
        mitigation_by_class,
        max_lateral_error,
        final_speed,
        gate_rejects: trace.halo_actions("gate_reject").count(),
        errors: trace.of_kind(EventKind::Error).count(),
    }
}
