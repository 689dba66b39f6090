//! Deterministic event queue: events dequeue in (time, insertion sequence)
//! order, and nothing may be scheduled in the past.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::worker::WorkerProfile;

/// Internal queue entries; the logged event stream is separate and carries
/// the effects each handler produced.
#[derive(Debug, Clone, PartialEq)]
pub enum QueueEntry {
    AssignmentFinish { assignment_id: u64 },
    RecruitmentReady { profiles: Vec<WorkerProfile> },
    RetrainDone { version: u64 },
    MaintenanceTick,
    BatchStart,
    WorkerFree { worker_uid: u64 },
}

#[derive(Debug, Clone)]
struct Scheduled {
    time_s: f64,
    seq: u64,
    entry: QueueEntry,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.time_s == other.time_s && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first ordering.
        other
            .time_s
            .total_cmp(&self.time_s)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
    now_s: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_s(&self) -> f64 {
        self.now_s
    }

    /// Schedule an entry; panics if `time_s` precedes the current clock
    /// (event causality is a hard invariant, violating it is a bug).
    pub fn schedule(&mut self, time_s: f64, entry: QueueEntry) {
        assert!(
            time_s >= self.now_s,
            "event scheduled in the past: {time_s} < {}",
            self.now_s
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { time_s, seq, entry });
    }

    /// Pop the next event and advance the clock to it.
    pub fn pop(&mut self) -> Option<(f64, QueueEntry)> {
        let next = self.heap.pop()?;
        debug_assert!(next.time_s >= self.now_s);
        self.now_s = next.time_s;
        Some((next.time_s, next.entry))
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
