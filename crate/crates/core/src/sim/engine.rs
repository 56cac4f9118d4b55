//! Ordered event queue and simulation clock.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;

use super::{SimError, SimTime};

/// Event categories. Declaration order is the tie-break priority for
/// events scheduled at the same instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EventKind {
    ServiceClockFire,
    MessageArrival,
    SourceEmit,
    AdversaryObserve,
    MeasurementCheckpoint,
}

/// Handle returned by [`Engine::schedule`]; wraps the event's sequence number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub kind: EventKind,
    pub sequence: u64,
    pub payload: P,
}

impl<P> Event<P> {
    fn key(&self) -> (SimTime, EventKind, u64) {
        (self.fire_at, self.kind, self.sequence)
    }
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// One processed event, as recorded in the replay trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub fire_at: SimTime,
    pub kind: EventKind,
    pub sequence: u64,
}

/// Single-threaded discrete-event engine.
///
/// Events fire in `(fire_at, kind, sequence)` order. Cancellation is lazy:
/// cancelled entries stay in the heap and are skipped when popped.
#[derive(Debug)]
pub struct Engine<P> {
    clock: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Reverse<Event<P>>>,
    pending: HashSet<u64>,
    processed: u64,
    trace: Option<Vec<TraceEntry>>,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            clock: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            pending: HashSet::new(),
            processed: 0,
            trace: None,
        }
    }

    /// Same as [`Engine::new`] but records every processed event.
    pub fn with_trace() -> Self {
        Engine {
            trace: Some(Vec::new()),
            ..Self::new()
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        kind: EventKind,
        payload: P,
    ) -> Result<EventHandle, SimError> {
        if fire_at < self.clock {
            return Err(SimError::SchedulingInPast {
                fire_at: fire_at.secs(),
                clock: self.clock.secs(),
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.pending.insert(sequence);
        self.queue.push(Reverse(Event {
            fire_at,
            kind,
            sequence,
            payload,
        }));
        Ok(EventHandle(sequence))
    }

    /// Schedules `delay` seconds after the current clock.
    pub fn schedule_in(&mut self, delay: f64, kind: EventKind, payload: P) -> EventHandle {
        let at = self.clock + delay;
        self.schedule(at, kind, payload)
            .expect("non-negative delay never lands in the past")
    }

    pub fn cancel(&mut self, handle: EventHandle) -> Result<(), SimError> {
        if self.pending.remove(&handle.0) {
            Ok(())
        } else {
            Err(SimError::NotPending(handle.0))
        }
    }

    fn pop_due(&mut self, t_end: SimTime) -> Option<Event<P>> {
        loop {
            let head = self.queue.peek()?;
            if head.0.fire_at > t_end {
                return None;
            }
            let Reverse(event) = self.queue.pop()?;
            if self.pending.remove(&event.sequence) {
                return Some(event);
            }
        }
    }

    /// Processes every event with `fire_at <= t_end`, then sets the clock to
    /// `t_end`. The handler may schedule further events through the engine
    /// it receives.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<usize, SimError>
    where
        F: FnMut(&mut Engine<P>, Event<P>),
    {
        if t_end < self.clock {
            return Err(SimError::SchedulingInPast {
                fire_at: t_end.secs(),
                clock: self.clock.secs(),
            });
        }
        let mut count = 0;
        while let Some(event) = self.pop_due(t_end) {
            debug_assert!(event.fire_at >= self.clock);
            self.clock = event.fire_at;
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceEntry {
                    fire_at: event.fire_at,
                    kind: event.kind,
                    sequence: event.sequence,
                });
            }
            self.processed += 1;
            count += 1;
            handler(self, event);
        }
        self.clock = t_end;
        Ok(count)
    }
}
