use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scenario::VehicleId;

/// Who holds or waits for a charger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Occupant {
    Fleet(VehicleId),
    /// Non-fleet EV, by exogenous session id.
    Exogenous(u32),
}

impl Occupant {
    fn key(self) -> u64 {
        match self {
            Occupant::Fleet(v) => v.0 as u64,
            Occupant::Exogenous(id) => (1 << 32) | id as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    LeaveCharger { charger: usize, occupant: Occupant },
    ArrivalAtCharger { charger: usize, occupant: Occupant },
    /// A vehicle reaches the next stop of its passenger route.
    StopReached { vehicle: usize },
    EpochBoundary { epoch: usize },
    NewRequest { request: usize },
}

impl EventKind {
    /// Equal-time processing order.
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::LeaveCharger { .. } => 0,
            EventKind::ArrivalAtCharger { .. } => 1,
            EventKind::StopReached { .. } => 2,
            EventKind::EpochBoundary { .. } => 3,
            EventKind::NewRequest { .. } => 4,
        }
    }

    fn id(&self) -> u64 {
        match *self {
            EventKind::LeaveCharger { occupant, .. } | EventKind::ArrivalAtCharger { occupant, .. } => {
                occupant.key()
            }
            EventKind::StopReached { vehicle } => vehicle as u64,
            EventKind::EpochBoundary { epoch } => epoch as u64,
            EventKind::NewRequest { request } => request as u64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    seq: u64,
}

impl Event {
    fn key(&self) -> (f64, u8, u64, u64) {
        (self.time, self.kind.priority(), self.kind.id(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so that the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then(b.2.cmp(&a.2))
            .then(b.3.cmp(&a.3))
    }
}

/// Time-ordered queue; ties broken by kind priority, then id, then
/// insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            kind,
            seq: self.seq,
        });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
