use std::collections::BTreeMap;
use std::hash::Hasher;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scenario::node_group;
use super::{assert_trace, compute_metrics, AssertReport, ConfigError, FaultKind, FaultSpec, MetricsReport, Scenario};
use crate::bus::{
    Bus, EventKind, Filter, LivenessChange, Node, NodeContext, Payload, SimDuration, SimTime, Trace,
};
use crate::comm::{BaseStationNode, RaceFlagInputNode, RaptorDbwNode, TelemetryNode};
use crate::control::{LongControlNode, PathTrackerNode};
use crate::halo::{
    EkfPassthroughNode, GracefulStopNode, NodeHealthMonitorNode, SscInterfaceNode, TopicMultiplexerNode,
    MONITORED_NODES,
};
use crate::localization::{EkfNode, GnssUnit, MapBaselinkNode};
use crate::perception::LidarNode;
use crate::plant::{engine_rpm, DeadArc, GnssNode, ImuNode, Link, Opponent, TrackModel, World};
use crate::SimError;

/// Every node of the stack and its default rate, Hz.
pub const DEFAULT_RATES: [(&str, f64); 18] = [
    ("base_station", 100.0),
    ("ekf", 100.0),
    ("gnss_bottom", 20.0),
    ("gnss_top", 20.0),
    ("graceful_stop", 100.0),
    ("imu", 125.0),
    ("lidar", 20.0),
    ("long_control", 100.0),
    ("map_baselink_bottom", 20.0),
    ("map_baselink_top", 20.0),
    ("node_health_monitor", 100.0),
    ("path_tracker", 100.0),
    ("race_flag_input", 10.0),
    ("raptor_dbw", 100.0),
    ("ssc_interface", 100.0),
    ("telemetry", 5.0),
    ("topic_multiplexer", 100.0),
    ("truth", 20.0),
];

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: MetricsReport,
    pub report: AssertReport,
}

/// Stable 64-bit FNV-1a, used to key per-node random streams.
#[derive(Default)]
struct Fnv(u64);

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        if self.0 == 0 {
            self.0 = 0xcbf2_9ce4_8422_2325;
        }
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

fn node_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h = Fnv::default();
    h.write(name.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h.finish());
    rng
}

fn load_track(sc: &Scenario) -> Result<TrackModel, SimError> {
    match &sc.track {
        None => Ok(TrackModel::default_oval()),
        Some(p) => {
            let path = match &sc.base_dir {
                Some(dir) => dir.join(p),
                None => p.into(),
            };
            Ok(TrackModel::load(&path)?)
        }
    }
}

struct Stack {
    nodes: BTreeMap<String, Box<dyn Node>>,
    rngs: BTreeMap<String, ChaCha8Rng>,
}

fn build_stack(sc: &Scenario, world: &World, bus: &mut Bus) -> Result<Stack, SimError> {
    let rate = |name: &str| {
        sc.rates.get(name).copied().unwrap_or_else(|| {
            DEFAULT_RATES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, r)| *r)
                .expect("every built node has a default rate")
        })
    };
    let ego = world.ego;
    let speed = sc.ego.speed_mps;
    let h = &sc.halo;
    let threshold = SimDuration::from_millis(h.heartbeat_threshold_ms);
    let paths: BTreeMap<String, Vec<[f64; 2]>> = world
        .track
        .paths
        .iter()
        .map(|(n, p)| (n.clone(), p.points().to_vec()))
        .collect();

    let mut nodes: Vec<Box<dyn Node>> = vec![
        Box::new(GnssNode::new(GnssUnit::Top, rate("gnss_top"))),
        Box::new(GnssNode::new(GnssUnit::Bottom, rate("gnss_bottom"))),
        Box::new(ImuNode::new(rate("imu"))),
        Box::new(MapBaselinkNode::new(GnssUnit::Top, rate("map_baselink_top"), ego.heading)),
        Box::new(MapBaselinkNode::new(GnssUnit::Bottom, rate("map_baselink_bottom"), ego.heading)),
        Box::new(EkfNode::new(
            [ego.x, ego.y, ego.heading, ego.speed],
            sc.ekf,
            rate("ekf"),
            sc.cov_reduction,
        )),
        Box::new(LongControlNode::new(
            rate("long_control"),
            sc.control.long,
            sc.control.gears,
            speed,
            ego.gear,
        )),
        Box::new(PathTrackerNode::new(
            rate("path_tracker"),
            paths,
            &sc.ego.path,
            sc.vehicle.wheelbase,
            speed,
        )?),
        Box::new(RaceFlagInputNode::new(rate("race_flag_input"), sc.flags.clone())),
        Box::new(BaseStationNode::new(rate("base_station"), sc.flags.clone(), sc.joystick.clone())),
        Box::new(TelemetryNode::new(rate("telemetry"), &sc.ego.path)),
        Box::new(RaptorDbwNode::new(rate("raptor_dbw"))),
        Box::new(LidarNode::new(rate("lidar"), sc.detection)),
        Box::new(
            SscInterfaceNode::new(
                rate("ssc_interface"),
                h.limits,
                h.speeds,
                h.door,
                !sc.is_disabled("behavioral"),
                ego.gear,
            )?,
        ),
    ];
    if sc.is_disabled("topic_multiplexer") {
        nodes.push(Box::new(EkfPassthroughNode::new(rate("topic_multiplexer"))));
    } else {
        nodes.push(Box::new(TopicMultiplexerNode::new(rate("topic_multiplexer"), h.mux)));
    }
    let nhm = !sc.is_disabled("node_health_monitor");
    if !sc.is_disabled("graceful_stop") {
        nodes.push(Box::new(GracefulStopNode::new(rate("graceful_stop"), h.graceful_stop, nhm, threshold)));
    }
    if nhm {
        let monitored: Vec<&str> = MONITORED_NODES
            .iter()
            .copied()
            .filter(|n| !sc.is_disabled(n))
            .collect();
        nodes.push(Box::new(NodeHealthMonitorNode::new(
            rate("node_health_monitor"),
            threshold,
            h.moderate_brake,
            h.mux,
            &monitored,
        )));
    }

    let mut map = BTreeMap::new();
    let mut rngs = BTreeMap::new();
    for n in nodes {
        let desc = n.descriptor();
        rngs.insert(desc.name.clone(), node_rng(sc.seed, &desc.name));
        let name = desc.name.clone();
        bus.add_node(desc)?;
        map.insert(name, n);
    }
    Ok(Stack { nodes: map, rngs })
}

/// Lowest gear whose engine speed stays under the upshift point.
fn starting_gear(speed: f64, sc: &Scenario) -> u8 {
    let g = &sc.control.gears;
    (g.min_gear..=g.max_gear)
        .find(|gear| engine_rpm(speed, *gear) <= g.upshift_rpm)
        .unwrap_or(g.max_gear)
}

fn apply_fault(
    spec: &FaultSpec,
    bus: &mut Bus,
    world: &mut World,
    stack: &mut Stack,
) -> Result<(), SimError> {
    let now = bus.now();
    let kind = &spec.kind;
    bus.record(EventKind::Fault, &kind.target(), kind.name(), kind.summary());
    let secs = |s: f64| now + SimDuration::from_secs_f64(s);
    let mut forward = |node: &str, bus: &mut Bus| {
        let consumed = stack
            .nodes
            .get_mut(node)
            .is_some_and(|n| n.apply_fault(kind, now));
        if !consumed {
            bus.record(EventKind::Error, node, "fault_ignored", kind.name().to_string());
        }
    };
    match kind {
        FaultKind::NodeCrash { node } => {
            for n in node_group(node) {
                if bus.node(n).is_some() {
                    bus.inject_liveness(n, LivenessChange::Crashed)?;
                }
            }
        }
        FaultKind::NodeStall { node, duration_s } => {
            let d = SimDuration::from_secs_f64(*duration_s);
            for n in node_group(node) {
                if bus.node(n).is_some() {
                    bus.inject_liveness(n, LivenessChange::Stalled(d))?;
                }
            }
        }
        FaultKind::TopicDrop { topic, duration_s } => bus.add_filter(Filter::Drop {
            topic: topic.clone(),
            from: now,
            until: secs(*duration_s),
        })?,
        FaultKind::MessageDelay {
            topic,
            delay_ms,
            duration_s,
        } => bus.add_filter(Filter::Delay {
            topic: topic.clone(),
            delay: SimDuration::from_millis(*delay_ms),
            from: now,
            until: secs(*duration_s),
        })?,
        FaultKind::ValueCorrupt {
            topic,
            field,
            value,
            duration_s,
        } => bus.add_filter(Filter::Corrupt {
            topic: topic.clone(),
            field: field.clone(),
            value: *value,
            from: now,
            until: duration_s.map(secs),
        })?,
        FaultKind::CovInflate { .. } => forward("ekf", bus),
        FaultKind::DetectionBurst { .. } => forward("lidar", bus),
        FaultKind::DiagnosticsError { .. } => forward("raptor_dbw", bus),
        FaultKind::RadioDeadArc { link, from_m, to_m } => {
            let len = world.track.length();
            world.track.coverage.push(DeadArc {
                link: *link,
                from: from_m.rem_euclid(len),
                to: to_m.rem_euclid(len),
            });
        }
    }
    Ok(())
}

/// Tracks the path the stack is currently steering for.
struct PathFollower {
    path: String,
    scanned: usize,
}

impl PathFollower {
    fn update(&mut self, trace: &Trace) {
        for e in &trace.events[self.scanned..] {
            if let (EventKind::Publish, Some(Payload::DesiredPath { name })) = (e.kind, &e.payload) {
                self.path = name.clone();
            }
        }
        self.scanned = trace.events.len();
    }
}

fn record_truth(bus: &mut Bus, world: &World, follower: &mut PathFollower) {
    follower.update(&bus.trace);
    let e = &world.ego;
    let mut s = format!(
        "x={:.3} y={:.3} heading={:.4} speed={:.3} s={:.2} path={}",
        e.x,
        e.y,
        e.heading,
        e.speed,
        world.ego_arclength(),
        follower.path
    );
    if let Some(lat) = world.lateral_error(&follower.path) {
        s.push_str(&format!(" lat_err={lat:.4}"));
    }
    if let Some(sep) = world.true_separation() {
        s.push_str(&format!(" true_sep={sep:.3}"));
    }
    s.push_str(&format!(" engine_on={} gear={}", world.engine_on, e.gear));
    bus.record(EventKind::Truth, "world", "", s);
}

/// Runs a scenario to completion and checks its assertions.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput, SimError> {
    sc.validate()?;
    let track = load_track(sc)?;
    let path = track
        .path(&sc.ego.path)
        .ok_or_else(|| ConfigError::new("ego.path", format!("track has no path `{}`", sc.ego.path)))?;
    let mut ego = path.state_at(sc.ego.start_s, sc.ego.speed_mps);
    ego.gear = starting_gear(sc.ego.speed_mps, sc);
    let mut world = World::new(track, sc.vehicle, sc.noise.clone(), ego);
    if let Some(o) = &sc.opponent {
        if world.track.path(&o.path).is_none() {
            return Err(ConfigError::new("opponent.path", format!("track has no path `{}`", o.path)).into());
        }
        world.opponent = Some(Opponent {
            path: o.path.clone(),
            s: o.start_s,
            speed: o.speed_mps,
        });
    }

    let mut bus = Bus::with_stack_topics();
    bus.trace = Trace::new(sc.trace_ticks);
    let mut stack = build_stack(sc, &world, &mut bus)?;

    let mut faults: Vec<&FaultSpec> = sc.faults.iter().collect();
    faults.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
    let mut faults = faults.into_iter().peekable();

    let end = SimTime::from_secs_f64(sc.duration_s);
    let truth_period = SimDuration::from_hz(sc.rates.get("truth").copied().unwrap_or(20.0));
    let mut next_truth = SimTime::ZERO;
    let mut follower = PathFollower {
        path: sc.ego.path.clone(),
        scanned: 0,
    };

    loop {
        let tick_at = bus.peek_next_tick().filter(|t| *t <= end);
        let fault_at = faults
            .peek()
            .map(|f| SimTime::from_secs_f64(f.at_s))
            .filter(|t| *t <= end);
        let truth_at = Some(next_truth).filter(|t| *t <= end);
        let Some(t) = [tick_at, fault_at, truth_at].into_iter().flatten().min() else {
            break;
        };

        if fault_at == Some(t) {
            bus.set_now(t);
            world.advance_to(t)?;
            let spec = faults.next().expect("peeked");
            apply_fault(spec, &mut bus, &mut world, &mut stack)?;
            continue;
        }
        if truth_at == Some(t) && tick_at.is_none_or(|tt| t < tt) {
            bus.set_now(t);
            world.advance_to(t)?;
            record_truth(&mut bus, &world, &mut follower);
            next_truth = next_truth + truth_period;
            continue;
        }

        let Some((t, name)) = bus.next_tick(end) else {
            break;
        };
        world.advance_to(t)?;
        let dead = world.link_dead(Link::Basestation);
        if dead != bus.link_dead(Link::Basestation) {
            bus.set_link_dead(Link::Basestation, dead);
            bus.record(EventKind::Truth, "world", "link", format!("link=basestation dead={dead}"));
        }
        let inbox = bus.drain_inbox(&name);
        let node = stack.nodes.get_mut(&name).expect("scheduled nodes are built");
        let rng = stack.rngs.get_mut(&name).expect("one stream per node");
        let mut ctx = NodeContext::new(&name, inbox, &mut world, rng, &mut bus);
        node.tick(&mut ctx)?;
        if ctx.halo_events() > 0 {
            record_truth(&mut bus, &world, &mut follower);
        }
    }
    world.advance_to(end)?;
    bus.set_now(end);

    let trace = std::mem::take(&mut bus.trace);
    let metrics = compute_metrics(&trace, &sc.name, sc.seed, sc.duration_s);
    let report = assert_trace(&trace, &sc.asserts).map_err(|e| ConfigError::new("assert", e.to_string()))?;
    Ok(RunOutput { trace, metrics, report })
}
