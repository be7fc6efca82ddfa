use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{parse_summary, Payload, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Publish,
    Drop,
    Tick,
    Fault,
    Halo,
    Truth,
    Error,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Publish => "publish",
            EventKind::Drop => "drop",
            EventKind::Tick => "tick",
            EventKind::Fault => "fault",
            EventKind::Halo => "halo",
            EventKind::Truth => "truth",
            EventKind::Error => "error",
        }
    }
}

/// One trace line. Field order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ns: u64,
    pub kind: EventKind,
    pub node: String,
    pub topic: String,
    pub seq: Option<u64>,
    pub payload_summary: String,
    /// Typed copy of a published payload. Not serialized.
    #[serde(skip)]
    pub payload: Option<Payload>,
}

impl TraceEvent {
    pub fn time(&self) -> SimTime {
        SimTime::from_nanos(self.t_ns)
    }

    pub fn t_s(&self) -> f64 {
        self.time().as_secs_f64()
    }

    /// Looks up `key` in the `k=v` summary.
    pub fn field(&self, key: &str) -> Option<&str> {
        parse_summary(&self.payload_summary)
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    pub fn field_f64(&self, key: &str) -> Option<f64> {
        self.field(key).and_then(|v| v.parse().ok())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub log_ticks: bool,
}

impl Trace {
    pub fn new(log_ticks: bool) -> Self {
        Trace {
            events: Vec::new(),
            log_ticks,
        }
    }

    pub fn push(&mut self, t: SimTime, kind: EventKind, node: &str, topic: &str, seq: Option<u64>, summary: String) {
        self.events.push(TraceEvent {
            t_ns: t.as_nanos(),
            kind,
            node: node.to_string(),
            topic: topic.to_string(),
            seq,
            payload_summary: summary,
            payload: None,
        });
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn publishes_on<'a>(&'a self, topic: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events
            .iter()
            .filter(move |e| e.kind == EventKind::Publish && e.topic == topic)
    }

    pub fn halo_actions<'a>(&'a self, action: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events
            .iter()
            .filter(move |e| e.kind == EventKind::Halo && e.topic == action)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TraceEvent = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            events.push(e);
        }
        let log_ticks = events.iter().any(|e| e.kind == EventKind::Tick);
        Ok(Trace { events, log_ticks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_order_is_fixed() {
        let mut t = Trace::new(true);
        t.push(SimTime::from_millis(10), EventKind::Publish, "imu", "imu", Some(3), "accel=0.0000".into());
        assert_eq!(
            t.to_jsonl(),
            "{\"t_ns\":10000000,\"kind\":\"publish\",\"node\":\"imu\",\"topic\":\"imu\",\"seq\":3,\"payload_summary\":\"accel=0.0000\"}\n"
        );
        let back = Trace::read_jsonl(t.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back.events, t.events);
    }
}
