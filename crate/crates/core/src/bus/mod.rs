//! Virtual-time publish/subscribe bus and next-event node scheduler.

mod message;
mod node;
mod time;
pub mod topics;
mod trace;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use message::{parse_summary, Payload, PayloadKind, SimMessage};
pub use node::{Node, NodeContext};
pub use time::{SimDuration, SimTime};
pub use trace::{EventKind, Trace, TraceEvent};

use crate::plant::Link;

/// Default bound on each subscriber's mailbox; the oldest message is
/// discarded on overflow.
pub const DEFAULT_MAILBOX_DEPTH: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusError {
    #[error("node {node} published on {topic} after it crashed")]
    PublishFromDeadNode { node: String, topic: String },
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("topic {topic} carries {expected:?}, got {got:?}")]
    TopicTypeMismatch {
        topic: String,
        expected: PayloadKind,
        got: PayloadKind,
    },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} is already registered")]
    DuplicateNode(String),
    #[error("node {0} crashed and cannot be resurrected within a run")]
    ResurrectCrashedNode(String),
    #[error("tick rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("{kind:?} payload has no field {field}")]
    UnknownField { kind: PayloadKind, field: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liveness {
    Running,
    Crashed,
    /// Skips ticks due before `until`; state is retained.
    Stalled { until: SimTime },
}

/// Requested liveness change, with stalls expressed as a duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LivenessChange {
    Running,
    Crashed,
    Stalled(SimDuration),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDescriptor {
    pub name: String,
    pub rate_hz: f64,
    pub subscribes: Vec<String>,
    pub publishes: Vec<String>,
    pub status: Liveness,
}

impl NodeDescriptor {
    pub fn new<S: Into<String>>(
        name: &str,
        rate_hz: f64,
        subscribes: impl IntoIterator<Item = S>,
        publishes: impl IntoIterator<Item = S>,
    ) -> Self {
        NodeDescriptor {
            name: name.to_string(),
            rate_hz,
            subscribes: subscribes.into_iter().map(Into::into).collect(),
            publishes: publishes.into_iter().map(Into::into).collect(),
            status: Liveness::Running,
        }
    }

    pub fn period(&self) -> SimDuration {
        SimDuration::from_hz(self.rate_hz)
    }
}

#[derive(Debug, Clone)]
struct TopicInfo {
    kind: PayloadKind,
    link: Option<Link>,
    seq: u64,
    subscribers: Vec<String>,
}

#[derive(Debug, Clone)]
struct Envelope {
    deliver_at: SimTime,
    msg: SimMessage,
}

/// A transport-level fault active over `[from, until)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Filter {
    Drop {
        topic: String,
        from: SimTime,
        until: SimTime,
    },
    Delay {
        topic: String,
        delay: SimDuration,
        from: SimTime,
        until: SimTime,
    },
    Corrupt {
        topic: String,
        field: String,
        value: f64,
        from: SimTime,
        until: Option<SimTime>,
    },
}

impl Filter {
    fn topic(&self) -> &str {
        match self {
            Filter::Drop { topic, .. } | Filter::Delay { topic, .. } | Filter::Corrupt { topic, .. } => topic,
        }
    }

    fn active(&self, now: SimTime) -> bool {
        match self {
            Filter::Drop { from, until, .. } | Filter::Delay { from, until, .. } => now >= *from && now < *until,
            Filter::Corrupt { from, until, .. } => now >= *from && until.map_or(true, |u| now < u),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bus {
    now: SimTime,
    topics: BTreeMap<String, TopicInfo>,
    nodes: BTreeMap<String, NodeDescriptor>,
    mailboxes: BTreeMap<String, VecDeque<Envelope>>,
    schedule: BinaryHeap<Reverse<(SimTime, String)>>,
    filters: Vec<Filter>,
    dead_links: BTreeSet<Link>,
    mailbox_depth: usize,
    pub trace: Trace,
}

impl Default for Bus {
    fn default() -> Self {
        Bus::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Bus {
            now: SimTime::ZERO,
            topics: BTreeMap::new(),
            nodes: BTreeMap::new(),
            mailboxes: BTreeMap::new(),
            schedule: BinaryHeap::new(),
            filters: Vec::new(),
            dead_links: BTreeSet::new(),
            mailbox_depth: DEFAULT_MAILBOX_DEPTH,
            trace: Trace::new(true),
        }
    }

    /// A bus with every topic of the racing stack registered.
    pub fn with_stack_topics() -> Self {
        let mut bus = Bus::new();
        for (name, kind, link) in topics::registry() {
            bus.register_topic(&name, kind, link)
                .expect("registry has no conflicting entries");
        }
        bus
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Moves the clock forward; the clock never runs backwards.
    pub fn set_now(&mut self, t: SimTime) {
        self.now = self.now.max(t);
    }

    pub fn set_mailbox_depth(&mut self, depth: usize) {
        self.mailbox_depth = depth.max(1);
    }

    pub fn register_topic(&mut self, name: &str, kind: PayloadKind, link: Option<Link>) -> Result<(), BusError> {
        match self.topics.get(name) {
            Some(info) if info.kind != kind => Err(BusError::TopicTypeMismatch {
                topic: name.to_string(),
                expected: info.kind,
                got: kind,
            }),
            Some(_) => Ok(()),
            None => {
                self.topics.insert(
                    name.to_string(),
                    TopicInfo {
                        kind,
                        link,
                        seq: 0,
                        subscribers: Vec::new(),
                    },
                );
                Ok(())
            }
        }
    }

    pub fn topic_kind(&self, name: &str) -> Option<PayloadKind> {
        self.topics.get(name).map(|t| t.kind)
    }

    pub fn has_topic(&self, name: &str) -> bool {
        self.topics.contains_key(name)
    }

    /// Registers a node; its first tick is one period after the current time.
    pub fn add_node(&mut self, desc: NodeDescriptor) -> Result<(), BusError> {
        if !(desc.rate_hz > 0.0) || !desc.rate_hz.is_finite() {
            return Err(BusError::InvalidRate(desc.rate_hz));
        }
        if self.nodes.contains_key(&desc.name) {
            return Err(BusError::DuplicateNode(desc.name));
        }
        for t in desc.subscribes.iter().chain(&desc.publishes) {
            if !self.topics.contains_key(t) {
                return Err(BusError::UnknownTopic(t.clone()));
            }
        }
        for t in &desc.subscribes {
            self.topics.get_mut(t).unwrap().subscribers.push(desc.name.clone());
        }
        self.schedule.push(Reverse((self.now + desc.period(), desc.name.clone())));
        self.mailboxes.insert(desc.name.clone(), VecDeque::new());
        self.nodes.insert(desc.name.clone(), desc);
        Ok(())
    }

    pub fn node(&self, name: &str) -> Option<&NodeDescriptor> {
        self.nodes.get(name)
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn liveness(&self, name: &str) -> Result<Liveness, BusError> {
        self.nodes
            .get(name)
            .map(|d| d.status)
            .ok_or_else(|| BusError::UnknownNode(name.to_string()))
    }

    pub fn inject_liveness(&mut self, name: &str, change: LivenessChange) -> Result<(), BusError> {
        let now = self.now;
        let desc = self
            .nodes
            .get_mut(name)
            .ok_or_else(|| BusError::UnknownNode(name.to_string()))?;
        if desc.status == Liveness::Crashed {
            return match change {
                LivenessChange::Crashed => Ok(()),
                _ => Err(BusError::ResurrectCrashedNode(name.to_string())),
            };
        }
        desc.status = match change {
            LivenessChange::Running => Liveness::Running,
            LivenessChange::Crashed => Liveness::Crashed,
            LivenessChange::Stalled(d) => Liveness::Stalled { until: now + d },
        };
        if desc.status == Liveness::Crashed {
            if let Some(mb) = self.mailboxes.get_mut(name) {
                mb.clear();
            }
        }
        Ok(())
    }

    pub fn add_filter(&mut self, f: Filter) -> Result<(), BusError> {
        if !self.topics.contains_key(f.topic()) {
            return Err(BusError::UnknownTopic(f.topic().to_string()));
        }
        self.filters.push(f);
        Ok(())
    }

    pub fn set_link_dead(&mut self, link: Link, dead: bool) {
        if dead {
            self.dead_links.insert(link);
        } else {
            self.dead_links.remove(&link);
        }
    }

    pub fn link_dead(&self, link: Link) -> bool {
        self.dead_links.contains(&link)
    }

    pub fn publish(&mut self, node: &str, topic: &str, mut payload: Payload) -> Result<SimMessage, BusError> {
        let desc = self
            .nodes
            .get(node)
            .ok_or_else(|| BusError::UnknownNode(node.to_string()))?;
        if desc.status == Liveness::Crashed {
            return Err(BusError::PublishFromDeadNode {
                node: node.to_string(),
                topic: topic.to_string(),
            });
        }
        let now = self.now;
        let info = self
            .topics
            .get_mut(topic)
            .ok_or_else(|| BusError::UnknownTopic(topic.to_string()))?;
        if payload.kind() != info.kind {
            return Err(BusError::TopicTypeMismatch {
                topic: topic.to_string(),
                expected: info.kind,
                got: payload.kind(),
            });
        }

        let mut delay = SimDuration::ZERO;
        let mut dropped = None;
        for f in self.filters.iter().filter(|f| f.topic() == topic && f.active(now)) {
            match f {
                Filter::Corrupt { field, value, .. } => payload.set_field(field, *value)?,
                Filter::Drop { .. } => dropped = Some("topic_drop".to_string()),
                Filter::Delay { delay: d, .. } => delay = delay + *d,
            }
        }
        if let Some(link) = info.link {
            if self.dead_links.contains(&link) {
                dropped = Some(format!("link_dead={}", link_name(link)));
            }
        }

        info.seq += 1;
        let msg = SimMessage {
            topic: topic.to_string(),
            seq: info.seq,
            stamp: now,
            publisher: node.to_string(),
            payload,
        };
        self.trace.events.push(TraceEvent {
            t_ns: now.as_nanos(),
            kind: EventKind::Publish,
            node: node.to_string(),
            topic: topic.to_string(),
            seq: Some(msg.seq),
            payload_summary: msg.payload.summary(),
            payload: Some(msg.payload.clone()),
        });
        if let Some(reason) = dropped {
            self.trace
                .push(now, EventKind::Drop, node, topic, Some(msg.seq), format!("reason={reason}"));
            return Ok(msg);
        }

        let subscribers = info.subscribers.clone();
        for sub in subscribers {
            if self.nodes[&sub].status == Liveness::Crashed {
                continue;
            }
            let mb = self.mailboxes.get_mut(&sub).expect("mailbox exists per node");
            mb.push_back(Envelope {
                deliver_at: now + delay,
                msg: msg.clone(),
            });
            if mb.len() > self.mailbox_depth {
                let old = mb.pop_front().expect("non-empty");
                self.trace.push(
                    now,
                    EventKind::Drop,
                    &sub,
                    &old.msg.topic,
                    Some(old.msg.seq),
                    "reason=mailbox_overflow".to_string(),
                );
            }
        }
        Ok(msg)
    }

    /// Removes and returns every message deliverable to `node` by now, in
    /// delivery order.
    pub fn drain_inbox(&mut self, node: &str) -> Vec<SimMessage> {
        let now = self.now;
        let Some(mb) = self.mailboxes.get_mut(node) else {
            return Vec::new();
        };
        let mut ready: Vec<Envelope> = Vec::new();
        let mut keep = VecDeque::with_capacity(mb.len());
        for env in mb.drain(..) {
            if env.deliver_at <= now {
                ready.push(env);
            } else {
                keep.push_back(env);
            }
        }
        *mb = keep;
        // stable: equal delivery times keep publish order
        ready.sort_by_key(|e| e.deliver_at);
        ready.into_iter().map(|e| e.msg).collect()
    }

    pub fn peek_next_tick(&self) -> Option<SimTime> {
        self.schedule.peek().map(|Reverse((t, _))| *t)
    }

    /// Pops the earliest due tick at or before `limit`, skipping crashed and
    /// stalled nodes, and advances the clock to it.
    pub fn next_tick(&mut self, limit: SimTime) -> Option<(SimTime, String)> {
        loop {
            let Reverse((due, _)) = self.schedule.peek()?;
            if *due > limit {
                return None;
            }
            let Reverse((due, name)) = self.schedule.pop().expect("peeked");
            let desc = self.nodes.get_mut(&name).expect("scheduled nodes exist");
            match desc.status {
                Liveness::Crashed => continue,
                Liveness::Stalled { until } if due < until => {
                    let next = due + desc.period();
                    self.schedule.push(Reverse((next, name)));
                    continue;
                }
                Liveness::Stalled { .. } => desc.status = Liveness::Running,
                Liveness::Running => {}
            }
            let next = due + desc.period();
            self.schedule.push(Reverse((next, name.clone())));
            self.set_now(due);
            if self.trace.log_ticks {
                self.trace.push(due, EventKind::Tick, &name, "", None, String::new());
            }
            return Some((due, name));
        }
    }

    /// Collects every tick due in `(now, now + dt]` in execution order and
    /// leaves the clock at `now + dt`.
    pub fn step(&mut self, dt: SimDuration) -> Vec<(String, SimTime)> {
        let end = self.now + dt;
        let mut out = Vec::new();
        while let Some((t, name)) = self.next_tick(end) {
            out.push((name, t));
        }
        self.set_now(end);
        out
    }

    pub fn record(&mut self, kind: EventKind, node: &str, topic: &str, summary: String) {
        let now = self.now;
        self.trace.push(now, kind, node, topic, None, summary);
    }
}

pub fn link_name(link: Link) -> &'static str {
    match link {
        Link::Mylaps => "mylaps",
        Link::Basestation => "basestation",
    }
}
