//! Deterministic discrete-event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::channel::Direction;

/// Simulator events. `ChannelFree` fires when a channel path finishes a
/// transfer and may commit its next request; `RequestComplete` fires when
/// the issuing task observes completion (transfer end plus latency).
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    TaskArrive {
        task: u64,
    },
    ChannelFree {
        link: usize,
        direction: Direction,
    },
    RequestComplete {
        task: u64,
        request_id: u64,
        link: usize,
        direction: Direction,
        size_bytes: u64,
        issue_time_ns: f64,
    },
    TimeSliceExpire {
        cpu: usize,
        epoch: u64,
    },
    SampleTick,
    IssueRetry {
        task: u64,
    },
}

#[derive(Debug)]
struct Entry {
    t_ns: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.t_ns.total_cmp(&other.t_ns) == Ordering::Equal && self.seq == other.seq
    }
}
impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want earliest (t, seq) first.
        other
            .t_ns
            .total_cmp(&self.t_ns)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-ordered queue of (time, sequence, event); sequence breaks ties by
/// insertion order for full determinism.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue::default()
    }

    pub fn push(&mut self, t_ns: f64, event: Event) {
        debug_assert!(t_ns.is_finite() && t_ns >= 0.0);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { t_ns, seq, event });
    }

    pub fn pop(&mut self) -> Option<(f64, Event)> {
        self.heap.pop().map(|e| (e.t_ns, e.event))
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
