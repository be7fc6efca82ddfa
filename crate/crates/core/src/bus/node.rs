use rand_chacha::ChaCha8Rng;

use super::{Bus, BusError, EventKind, NodeDescriptor, Payload, SimMessage, SimTime};
use crate::harness::FaultKind;
use crate::plant::World;
use crate::SimError;

/// Everything a node sees during one tick.
pub struct NodeContext<'a> {
    pub now: SimTime,
    pub name: &'a str,
    pub inbox: Vec<SimMessage>,
    pub world: &'a mut World,
    pub rng: &'a mut ChaCha8Rng,
    pub(crate) bus: &'a mut Bus,
    pub(crate) halo_events: usize,
}

impl<'a> NodeContext<'a> {
    pub fn new(
        name: &'a str,
        inbox: Vec<SimMessage>,
        world: &'a mut World,
        rng: &'a mut ChaCha8Rng,
        bus: &'a mut Bus,
    ) -> Self {
        NodeContext {
            now: bus.now(),
            name,
            inbox,
            world,
            rng,
            bus,
            halo_events: 0,
        }
    }

    pub fn publish(&mut self, topic: &str, payload: Payload) -> Result<SimMessage, BusError> {
        self.bus.publish(self.name, topic, payload)
    }

    /// Records a safety-layer decision in the trace.
    pub fn halo(&mut self, action: &str, detail: impl Into<String>) {
        self.halo_events += 1;
        self.bus.record(EventKind::Halo, self.name, action, detail.into());
    }

    /// Records a non-fatal error in the trace.
    pub fn error(&mut self, what: &str, detail: impl Into<String>) {
        self.bus.record(EventKind::Error, self.name, what, detail.into());
    }

    pub fn halo_events(&self) -> usize {
        self.halo_events
    }
}

/// A state machine stepped by the scheduler at its declared rate.
pub trait Node {
    fn descriptor(&self) -> NodeDescriptor;

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError>;

    /// Lets a node react to a fault aimed at its internals. Returns whether
    /// the fault was consumed.
    fn apply_fault(&mut self, _fault: &FaultKind, _now: SimTime) -> bool {
        false
    }
}
