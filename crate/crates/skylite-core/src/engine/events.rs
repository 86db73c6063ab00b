//! Deterministic discrete-event queue.
//!
//! Events execute in `(time, sequence)` order; sequence numbers are assigned
//! at enqueue, so same-time events run in the order they were scheduled and
//! a run is a pure function of the scenario.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::skycore::CoreMessage;
use crate::types::{AgentId, UavId, UeId};

/// Per-hop delivery latency of the backhaul control/data plane, ms.
pub const HOP_LATENCY_MS: u64 = 5;

/// Movement/measurement tick, ms.
pub const TICK_MS: u64 = 1_000;

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// One movement tick: every flying UAV advances, MSR-arbitrated.
    MeasurementStep,
    /// Re-run the RAN pipelines and reconfigure the backhaul.
    PeriodicUpdate,
    UeMove { ue: UeId, x: f64, y: f64 },
    UavEnergyTick,
    UavDown { uav: UavId, scripted: bool },
    UavRestored { uav: UavId },
    CoreDelivery { msg: CoreMessage },
    HandoffTimeout { agent: AgentId, ue: UeId },
    /// Inject one second's worth of demand traffic.
    TrafficTick,
}

#[derive(Clone, Debug)]
pub struct Event {
    pub time_ms: u64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time_ms == other.time_ms && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first.
        (other.time_ms, other.seq).cmp(&(self.time_ms, self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time_ms: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time_ms, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|e| e.time_ms)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
