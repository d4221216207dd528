use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SimTime;

/// A pending event. Ordered by `(fire_at, sequence)`, which is a strict
/// total order because sequence numbers are never reused.
#[derive(Debug, Clone)]
pub struct SimEvent<E> {
    pub fire_at: SimTime,
    pub sequence: u64,
    pub payload: E,
}

impl<E> PartialEq for SimEvent<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.sequence == other.sequence
    }
}

impl<E> Eq for SimEvent<E> {}

impl<E> PartialOrd for SimEvent<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for SimEvent<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

/// Deterministic pending-event set with a monotone clock.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<SimEvent<E>>,
    now: SimTime,
    next_sequence: u64,
    processed: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_sequence: 0,
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Number of events popped so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Schedules `payload` at the absolute time `fire_at`.
    ///
    /// Scheduling in the past is a programming error and aborts the run.
    pub fn schedule(&mut self, fire_at: SimTime, payload: E) {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: fire_at={} now={}",
            fire_at,
            self.now
        );
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(SimEvent {
            fire_at,
            sequence,
            payload,
        });
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) {
        self.schedule(self.now + delay, payload);
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|ev| ev.fire_at)
    }

    /// Pops the next event if it fires no later than `end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<SimEvent<E>> {
        if self.heap.peek()?.fire_at > end {
            return None;
        }
        let ev = self.heap.pop()?;
        debug_assert!(ev.fire_at >= self.now);
        self.now = ev.fire_at;
        self.processed += 1;
        Some(ev)
    }

    /// Moves the clock forward without firing anything. Used to close a run
    /// at its end bound when the queue still holds later events.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            if let Some(next) = self.peek_time() {
                assert!(next >= t, "advancing past a pending event");
            }
            self.now = t;
        }
    }
}
