//! Slotted relay buffers and their service disciplines.
//!
//! A buffer has `q` physical slots numbered `0..q`; slot 0 is the head.
//!
//! * `fifo`: messages are kept packed at the low end in arrival order and the
//!   oldest leaves on every service firing.
//! * `random-ladder`: an arriving message takes one of the empty slots
//!   uniformly at random. Each firing serves slot 0 if occupied, and every
//!   message moves down one slot whether or not anything left.
//! * `random-shuffle`: uniform insertion as above, but a firing serves the
//!   lowest occupied slot and nothing else moves.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    Fifo,
    RandomLadder,
    RandomShuffle,
}

impl Discipline {
    pub const ALL: [Discipline; 3] = [
        Discipline::Fifo,
        Discipline::RandomLadder,
        Discipline::RandomShuffle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Discipline::Fifo => "fifo",
            Discipline::RandomLadder => "random-ladder",
            Discipline::RandomShuffle => "random-shuffle",
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown discipline '{0}' (expected fifo, random-ladder or random-shuffle)")]
pub struct UnknownDiscipline(pub String);

impl FromStr for Discipline {
    type Err = UnknownDiscipline;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Discipline::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownDiscipline(s.to_string()))
    }
}

/// Why a message was discarded. Drop-tail is the only policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DropReason {
    BufferFull,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DropRecord {
    pub message: u64,
    pub node: usize,
    pub time: f64,
    pub reason: DropReason,
}

/// Outcome of [`SlottedBuffer::insert`].
#[derive(Debug, PartialEq, Eq)]
pub enum Insertion<T> {
    Placed(usize),
    /// The buffer was full; the message is handed back to the caller.
    Dropped(T),
}

#[derive(Clone, Debug)]
pub struct SlottedBuffer<T> {
    slots: Vec<Option<T>>,
    occupied: usize,
    discipline: Discipline,
}

impl<T> SlottedBuffer<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, discipline: Discipline) -> Self {
        assert!(capacity >= 1, "buffer capacity must be at least 1");
        SlottedBuffer {
            slots: (0..capacity).map(|_| None).collect(),
            occupied: 0,
            discipline,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn discipline(&self) -> Discipline {
        self.discipline
    }

    /// Number of occupied slots.
    pub fn occupancy(&self) -> usize {
        debug_assert_eq!(self.occupied, self.recount());
        self.occupied
    }

    pub fn recount(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_full(&self) -> bool {
        self.occupied == self.slots.len()
    }

    pub fn slots(&self) -> &[Option<T>] {
        &self.slots
    }

    /// Places `msg` according to the discipline. `rng` is only drawn from by
    /// the randomized disciplines, and only when the buffer has room.
    pub fn insert(&mut self, msg: T, rng: &mut RngStream) -> Insertion<T> {
        if self.is_full() {
            return Insertion::Dropped(msg);
        }
        let slot = match self.discipline {
            Discipline::Fifo => self.occupied,
            Discipline::RandomLadder | Discipline::RandomShuffle => {
                let empty = self.slots.len() - self.occupied;
                let k = rng
                    .uniform_index(empty)
                    .expect("a non-full buffer has at least one empty slot");
                self.nth_empty(k)
            }
        };
        debug_assert!(self.slots[slot].is_none());
        self.slots[slot] = Some(msg);
        self.occupied += 1;
        Insertion::Placed(slot)
    }

    fn nth_empty(&self, k: usize) -> usize {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .nth(k)
            .map(|(i, _)| i)
            .expect("k is below the empty-slot count")
    }

    /// Applies one service-clock firing and returns the departing message, if any.
    pub fn on_service_fire(&mut self) -> Option<T> {
        let out = match self.discipline {
            Discipline::Fifo => {
                // Packed layout: the oldest message is always in slot 0.
                let head = self.slots[0].take();
                if head.is_some() {
                    self.slots.rotate_left(1);
                }
                head
            }
            Discipline::RandomLadder => {
                let head = self.slots[0].take();
                self.slots.rotate_left(1);
                head
            }
            Discipline::RandomShuffle => self.slots.iter_mut().find(|s| s.is_some())?.take(),
        };
        if out.is_some() {
            self.occupied -= 1;
        }
        out
    }
}

impl<T: Clone> SlottedBuffer<T> {
    /// Builds a buffer with the given slots pre-filled. Intended for tests and
    /// for freezing a state to probe insertion statistics.
    pub fn from_slots(slots: Vec<Option<T>>, discipline: Discipline) -> Self {
        assert!(!slots.is_empty(), "buffer capacity must be at least 1");
        let occupied = slots.iter().filter(|s| s.is_some()).count();
        SlottedBuffer {
            slots,
            occupied,
            discipline,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rng() -> RngStream {
        RngStream::new(42, "slots:test")
    }

    fn ladder_with(q: usize, filled: &[(usize, u32)]) -> SlottedBuffer<u32> {
        let mut slots = vec![None; q];
        for &(i, m) in filled {
            slots[i] = Some(m);
        }
        SlottedBuffer::from_slots(slots, Discipline::RandomLadder)
    }

    #[test]
    fn single_slot_always_slot_zero() {
        for d in Discipline::ALL {
            let mut b = SlottedBuffer::new(1, d);
            assert_eq!(b.insert(7u32, &mut rng()), Insertion::Placed(0));
        }
    }

    #[test]
    fn full_buffer_drops() {
        let mut b = SlottedBuffer::from_slots((0..20).map(Some).collect(), Discipline::RandomLadder);
        assert_eq!(b.insert(99, &mut rng()), Insertion::Dropped(99));
        assert_eq!(b.occupancy(), 20);
    }

    #[test]
    fn ladder_serves_head_and_shifts() {
        let mut b = ladder_with(5, &[(0, 0), (3, 3)]);
        assert_eq!(b.on_service_fire(), Some(0));
        assert_eq!(b.slots(), &[None, None, Some(3), None, None]);
        assert_eq!(b.occupancy(), 1);
    }

    #[test]
    fn ladder_shifts_when_head_empty() {
        let mut b = ladder_with(5, &[(3, 3)]);
        assert_eq!(b.on_service_fire(), None);
        assert_eq!(b.slots(), &[None, None, Some(3), None, None]);
    }

    #[test]
    fn fifo_serves_in_arrival_order() {
        let mut b = SlottedBuffer::new(4, Discipline::Fifo);
        let mut r = rng();
        b.insert(1u32, &mut r);
        b.insert(2u32, &mut r);
        assert_eq!(b.on_service_fire(), Some(1));
        assert_eq!(b.on_service_fire(), Some(2));
        assert_eq!(b.on_service_fire(), None);
    }

    #[test]
    fn shuffle_serves_lowest_without_moving() {
        let mut b = SlottedBuffer::from_slots(
            vec![None, Some(1u32), None, Some(3)],
            Discipline::RandomShuffle,
        );
        assert_eq!(b.on_service_fire(), Some(1));
        assert_eq!(b.slots(), &[None, None, None, Some(3)]);
        let mut empty: SlottedBuffer<u32> = SlottedBuffer::new(3, Discipline::RandomShuffle);
        assert_eq!(empty.on_service_fire(), None);
    }

    #[test]
    fn occupancy_counts() {
        let mut b = SlottedBuffer::new(20, Discipline::RandomLadder);
        assert_eq!(b.occupancy(), 0);
        let mut r = rng();
        for m in 0..3u32 {
            b.insert(m, &mut r);
        }
        assert_eq!(b.occupancy(), 3);
        // Fire until something leaves.
        while b.on_service_fire().is_none() {}
        assert_eq!(b.occupancy(), 2);
    }

    #[test]
    fn frozen_state_slot_choice_is_uniform() {
        // q = 20 with slots 0, 4, 8, 12, 16 occupied: 15 empty slots.
        let filled: Vec<(usize, u32)> = (0..5).map(|k| (4 * k, k as u32)).collect();
        let frozen = ladder_with(20, &filled);
        let mut r = RngStream::new(42, "slots:chi");
        let mut counts = [0u64; 20];
        let trials = 15_000;
        for _ in 0..trials {
            match frozen.clone().insert(100, &mut r) {
                Insertion::Placed(s) => counts[s] += 1,
                Insertion::Dropped(_) => unreachable!(),
            }
        }
        for (_, k) in &filled {
            assert_eq!(counts[4 * *k as usize], 0);
        }
        let expected = trials as f64 / 15.0;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 4 != 0)
            .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new(14.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p}");
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert,
        Fire,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![Just(Op::Insert), Just(Op::Fire)]
    }

    fn discipline() -> impl Strategy<Value = Discipline> {
        prop_oneof![
            Just(Discipline::Fifo),
            Just(Discipline::RandomLadder),
            Just(Discipline::RandomShuffle)
        ]
    }

    proptest! {
        #[test]
        fn occupancy_stays_in_bounds(
            q in 1usize..12,
            d in discipline(),
            seed in any::<u64>(),
            ops in prop::collection::vec(op(), 0..200),
        ) {
            let mut b = SlottedBuffer::new(q, d);
            let mut r = RngStream::new(seed, "slots:prop");
            let mut next = 0u32;
            for o in ops {
                let before = b.occupancy();
                match o {
                    Op::Insert => {
                        match b.insert(next, &mut r) {
                            Insertion::Placed(_) => prop_assert_eq!(b.occupancy(), before + 1),
                            Insertion::Dropped(_) => prop_assert_eq!(before, q),
                        }
                        next += 1;
                    }
                    Op::Fire => match b.on_service_fire() {
                        Some(_) => prop_assert_eq!(b.occupancy(), before - 1),
                        None => prop_assert_eq!(b.occupancy(), before),
                    },
                }
                prop_assert!(b.occupancy() <= q);
                prop_assert_eq!(b.occupancy(), b.recount());
            }
        }

        #[test]
        fn fifo_preserves_order(
            q in 1usize..12,
            ops in prop::collection::vec(op(), 0..200),
        ) {
            let mut b = SlottedBuffer::new(q, Discipline::Fifo);
            let mut r = RngStream::new(0, "unused");
            let mut accepted = Vec::new();
            let mut departed = Vec::new();
            for (i, o) in ops.into_iter().enumerate() {
                match o {
                    Op::Insert => {
                        if let Insertion::Placed(_) = b.insert(i, &mut r) {
                            accepted.push(i);
                        }
                    }
                    Op::Fire => departed.extend(b.on_service_fire()),
                }
            }
            prop_assert_eq!(&accepted[..departed.len()], &departed[..]);
        }

        #[test]
        fn ladder_departs_on_slot_plus_one_fire(
            q in 1usize..16,
            seed in any::<u64>(),
            ops in prop::collection::vec(op(), 0..300),
        ) {
            let mut b = SlottedBuffer::new(q, Discipline::RandomLadder);
            let mut r = RngStream::new(seed, "slots:ladder");
            let mut fires = 0u64;
            let mut expected = std::collections::HashMap::new();
            for (i, o) in ops.into_iter().enumerate() {
                match o {
                    Op::Insert => {
                        if let Insertion::Placed(slot) = b.insert(i, &mut r) {
                            expected.insert(i, fires + slot as u64 + 1);
                        }
                    }
                    Op::Fire => {
                        fires += 1;
                        if let Some(m) = b.on_service_fire() {
                            prop_assert_eq!(expected[&m], fires);
                        }
                    }
                }
            }
        }
    }
}
