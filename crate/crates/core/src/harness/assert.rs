//! Temporal assertions over a trace.
//!
//! A predicate is one of
//!
//! ```text
//! never(M)                 no event matches M
//! always(M)                every event selected by M meets its conditions
//! eventually(M)            some event matches M
//! within(D, after A, B)    every A is followed by a B no later than D
//! not_before(A, B)         no B occurs before the first A
//! ```
//!
//! A matcher `M` is `kind[:name][cond, ...]`. `kind` is an event kind
//! (`publish`, `drop`, `tick`, `fault`, `halo`, `truth`, `error`); `name`
//! is the topic, halo action or fault kind (the node, for ticks). Conditions
//! compare summary fields: `stop=true`, `true_sep<=-30`. The pseudo-field
//! `node` compares the emitting node. Durations add terms in `ms`, `s` or
//! `tick` (10 ms): `500ms + 1tick`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AssertSpec;
use crate::bus::{EventKind, SimDuration, SimTime, Trace, TraceEvent};

/// Length of one `tick` in durations: the period of a 100 Hz node.
const TICK: SimDuration = SimDuration::from_millis(10);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("malformed predicate `{input}`: {reason}")]
    MalformedPredicate { input: String, reason: String },
}

fn malformed(input: &str, reason: impl Into<String>) -> PredicateError {
    PredicateError::MalformedPredicate {
        input: input.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
struct Cond {
    field: String,
    op: Op,
    value: String,
}

impl Cond {
    fn holds(&self, ev: &TraceEvent) -> bool {
        let got = if self.field == "node" {
            Some(ev.node.as_str())
        } else {
            ev.field(&self.field)
        };
        let Some(got) = got else {
            return false;
        };
        match (got.parse::<f64>(), self.value.parse::<f64>()) {
            (Ok(a), Ok(b)) => match self.op {
                Op::Eq => a == b,
                Op::Ne => a != b,
                Op::Lt => a < b,
                Op::Le => a <= b,
                Op::Gt => a > b,
                Op::Ge => a >= b,
            },
            _ => match self.op {
                Op::Eq => got == self.value,
                Op::Ne => got != self.value,
                _ => false,
            },
        }
    }
}

/// Event selector plus conditions on its fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Matcher {
    kind: EventKind,
    name: Option<String>,
    conds: Vec<Cond>,
}

impl Matcher {
    /// Kind and name match, conditions not checked.
    pub fn selects(&self, ev: &TraceEvent) -> bool {
        if ev.kind != self.kind {
            return false;
        }
        match &self.name {
            None => true,
            Some(n) if self.kind == EventKind::Tick => &ev.node == n,
            Some(n) => &ev.topic == n,
        }
    }

    pub fn matches(&self, ev: &TraceEvent) -> bool {
        self.selects(ev) && self.conds.iter().all(|c| c.holds(ev))
    }

    pub fn parse(s: &str) -> Result<Self, PredicateError> {
        let s = s.trim();
        let (head, conds) = match s.find('[') {
            Some(i) => {
                let body = s[i + 1..]
                    .strip_suffix(']')
                    .ok_or_else(|| malformed(s, "unclosed `[`"))?;
                (&s[..i], parse_conds(s, body)?)
            }
            None => (s, Vec::new()),
        };
        let (kind, name) = match head.split_once(':') {
            Some((k, n)) => (k.trim(), Some(n.trim().to_string())),
            None => (head.trim(), None),
        };
        let kind = match kind {
            "publish" => EventKind::Publish,
            "drop" => EventKind::Drop,
            "tick" => EventKind::Tick,
            "fault" => EventKind::Fault,
            "halo" => EventKind::Halo,
            "truth" => EventKind::Truth,
            "error" => EventKind::Error,
            other => return Err(malformed(s, format!("unknown event kind `{other}`"))),
        };
        if name.as_deref() == Some("") {
            return Err(malformed(s, "empty name after `:`"));
        }
        Ok(Matcher { kind, name, conds })
    }
}

fn parse_conds(input: &str, body: &str) -> Result<Vec<Cond>, PredicateError> {
    let mut out = Vec::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let ops = [("<=", Op::Le), (">=", Op::Ge), ("!=", Op::Ne), ("<", Op::Lt), (">", Op::Gt), ("=", Op::Eq)];
        let (i, tok, op) = ops
            .iter()
            .filter_map(|(tok, op)| part.find(tok).map(|i| (i, *tok, *op)))
            .min_by_key(|(i, tok, _)| (*i, std::cmp::Reverse(tok.len())))
            .ok_or_else(|| malformed(input, format!("condition `{part}` has no operator")))?;
        let field = part[..i].trim();
        let value = part[i + tok.len()..].trim();
        if field.is_empty() || value.is_empty() {
            return Err(malformed(input, format!("condition `{part}` is incomplete")));
        }
        out.push(Cond {
            field: field.to_string(),
            op,
            value: value.to_string(),
        });
    }
    Ok(out)
}

fn parse_duration(input: &str, s: &str) -> Result<SimDuration, PredicateError> {
    let mut total = SimDuration::ZERO;
    for term in s.split('+').map(str::trim) {
        let split = term
            .find(|c: char| c.is_ascii_alphabetic())
            .ok_or_else(|| malformed(input, format!("duration `{term}` has no unit")))?;
        let n: f64 = term[..split]
            .trim()
            .parse()
            .map_err(|_| malformed(input, format!("bad number in `{term}`")))?;
        if !(n >= 0.0) {
            return Err(malformed(input, format!("negative duration `{term}`")));
        }
        let d = match term[split..].trim() {
            "ms" => SimDuration::from_secs_f64(n / 1000.0),
            "s" => SimDuration::from_secs_f64(n),
            "tick" | "ticks" => SimDuration::from_secs_f64(n * TICK.as_secs_f64()),
            u => return Err(malformed(input, format!("unknown unit `{u}`"))),
        };
        total = total + d;
    }
    Ok(total)
}

/// Splits on commas outside brackets and parentheses.
fn split_args(s: &str) -> Vec<&str> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Never(Matcher),
    Always(Matcher),
    Eventually(Matcher),
    Within {
        window: SimDuration,
        trigger: Matcher,
        response: Matcher,
    },
    NotBefore {
        gate: Matcher,
        guarded: Matcher,
    },
}

pub fn parse_predicate(s: &str) -> Result<Predicate, PredicateError> {
    let t = s.trim();
    let open = t.find('(').ok_or_else(|| malformed(s, "expected `name(...)`"))?;
    let body = t[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| malformed(s, "unbalanced parentheses"))?;
    let args = split_args(body);
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(malformed(s, format!("expected {n} argument(s), got {}", args.len())))
        }
    };
    match t[..open].trim() {
        "never" => {
            arity(1)?;
            Ok(Predicate::Never(Matcher::parse(args[0])?))
        }
        "always" => {
            arity(1)?;
            Ok(Predicate::Always(Matcher::parse(args[0])?))
        }
        "eventually" => {
            arity(1)?;
            Ok(Predicate::Eventually(Matcher::parse(args[0])?))
        }
        "within" => {
            arity(3)?;
            let trigger = args[1]
                .strip_prefix("after ")
                .ok_or_else(|| malformed(s, "second argument must start with `after`"))?;
            Ok(Predicate::Within {
                window: parse_duration(s, args[0])?,
                trigger: Matcher::parse(trigger)?,
                response: Matcher::parse(args[2])?,
            })
        }
        "not_before" => {
            arity(2)?;
            Ok(Predicate::NotBefore {
                gate: Matcher::parse(args[0])?,
                guarded: Matcher::parse(args[1])?,
            })
        }
        other => Err(malformed(s, format!("unknown combinator `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertOutcome {
    pub name: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
    /// First event that broke the predicate, when there is one.
    pub violation: Option<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssertReport {
    pub outcomes: Vec<AssertOutcome>,
}

impl AssertReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssertOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }
}

impl Predicate {
    /// `Ok(())` or the reason and first violating event.
    pub fn check(&self, trace: &Trace) -> Result<(), (String, Option<TraceEvent>)> {
        let events = &trace.events;
        match self {
            Predicate::Never(m) => match events.iter().find(|e| m.matches(e)) {
                Some(e) => Err((format!("matched at t={:.3}s", e.t_s()), Some(e.clone()))),
                None => Ok(()),
            },
            Predicate::Always(m) => match events.iter().find(|e| m.selects(e) && !m.matches(e)) {
                Some(e) => Err((format!("violated at t={:.3}s", e.t_s()), Some(e.clone()))),
                None => Ok(()),
            },
            Predicate::Eventually(m) => {
                if events.iter().any(|e| m.matches(e)) {
                    Ok(())
                } else {
                    Err(("never happened".into(), None))
                }
            }
            Predicate::Within {
                window,
                trigger,
                response,
            } => {
                let responses: Vec<SimTime> = events.iter().filter(|e| response.matches(e)).map(|e| e.time()).collect();
                for e in events.iter().filter(|e| trigger.matches(e)) {
                    let t = e.time();
                    if !responses.iter().any(|r| *r >= t && *r <= t + *window) {
                        return Err((
                            format!("no response within {:.3}s of t={:.3}s", window.as_secs_f64(), e.t_s()),
                            Some(e.clone()),
                        ));
                    }
                }
                Ok(())
            }
            Predicate::NotBefore { gate, guarded } => {
                let open = events.iter().find(|e| gate.matches(e)).map(|e| e.time());
                let early = events
                    .iter()
                    .find(|e| guarded.matches(e) && open.is_none_or(|t| e.time() < t));
                match early {
                    Some(e) => Err((format!("occurred at t={:.3}s before the gate", e.t_s()), Some(e.clone()))),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Evaluates every named check against the trace.
pub fn assert_trace(trace: &Trace, checks: &[AssertSpec]) -> Result<AssertReport, PredicateError> {
    let mut outcomes = Vec::with_capacity(checks.len());
    for spec in checks {
        let p = parse_predicate(&spec.check)?;
        let (passed, detail, violation) = match p.check(trace) {
            Ok(()) => (true, "ok".to_string(), None),
            Err((detail, ev)) => (false, detail, ev),
        };
        outcomes.push(AssertOutcome {
            name: spec.name.clone(),
            check: spec.check.clone(),
            passed,
            detail,
            violation,
        });
    }
    Ok(AssertReport { outcomes })
}
