//! Deterministic discrete-event core.
//!
//! Events live in an ordered map keyed by `(fire_at, seq)`, so events that
//! share a timestamp come out in insertion order regardless of payload.
//! Cancellation removes the entry outright.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::NodeId;

/// Simulation timestamp in integer microseconds since start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Whole seconds elapsed, i.e. the index of the second this instant falls in.
    pub const fn whole_secs(self) -> u64 {
        self.0 / 1_000_000
    }

    /// Span between two instants, zero if `earlier` is actually later.
    pub fn saturating_since(self, earlier: SimTime) -> Duration {
        Duration::from_micros(self.0.saturating_sub(earlier.0))
    }

    pub fn checked_sub(self, d: Duration) -> Option<SimTime> {
        self.0.checked_sub(d.as_micros() as u64).map(SimTime)
    }
}

impl Add<Duration> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: Duration) -> SimTime {
        SimTime(self.0 + rhs.as_micros() as u64)
    }
}

impl Sub for SimTime {
    type Output = Duration;

    fn sub(self, rhs: SimTime) -> Duration {
        Duration::from_micros(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Identifies a scheduled event for later cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    fire_at: SimTime,
    seq: u64,
}

impl EventHandle {
    pub fn fire_at(&self) -> SimTime {
        self.fire_at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimStats {
    pub scheduled: u64,
    pub processed: u64,
    pub cancelled: u64,
    pub pending: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
}

/// Event queue plus virtual clock.
#[derive(Debug)]
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    queue: BTreeMap<(SimTime, u64), (NodeId, P)>,
    stats: SimStats,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BTreeMap::new(),
            stats: SimStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: NodeId,
        payload: P,
    ) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::SchedulingInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.insert((fire_at, seq), (target, payload));
        self.stats.scheduled += 1;
        Ok(EventHandle { fire_at, seq })
    }

    /// Schedules relative to the current clock; never fails.
    pub fn schedule_in(&mut self, delay: Duration, target: NodeId, payload: P) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, target, payload)
            .expect("relative schedule cannot be in the past")
    }

    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.queue.remove(&(handle.fire_at, handle.seq)).is_some() {
            self.stats.cancelled += 1;
            true
        } else {
            false
        }
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.queue.contains_key(&(handle.fire_at, handle.seq))
    }

    /// Removes and returns the next event due at or before `end`, advancing
    /// the clock to its timestamp.
    pub fn pop_due(&mut self, end: SimTime) -> Option<SimEvent<P>> {
        let (&(fire_at, seq), _) = self.queue.first_key_value()?;
        if fire_at > end {
            return None;
        }
        let (target, payload) = self.queue.remove(&(fire_at, seq))?;
        debug_assert!(fire_at >= self.now);
        self.now = fire_at;
        self.stats.processed += 1;
        Some(SimEvent {
            fire_at,
            seq,
            target,
            payload,
        })
    }

    /// Processes every event with `fire_at <= end` through `handler`, then
    /// parks the clock at `end`. Handlers may schedule follow-ups.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> SimStats
    where
        F: FnMut(&mut Scheduler<P>, SimEvent<P>),
    {
        while let Some(ev) = self.pop_due(end) {
            handler(self, ev);
        }
        if end > self.now {
            self.now = end;
        }
        self.stats()
    }

    pub fn stats(&self) -> SimStats {
        SimStats {
            pending: self.queue.len() as u64,
            ..self.stats
        }
    }

    /// Pending events in firing order.
    pub fn pending(&self) -> impl Iterator<Item = (SimTime, NodeId, &P)> {
        self.queue.iter().map(|(&(t, _), (n, p))| (t, *n, p))
    }
}

/// Root of all randomness in a run: ChaCha8 seeded from a 64-bit seed.
/// Each node draws from its own stream so that traces do not depend on the
/// order in which nodes are visited.
#[derive(Debug, Clone, Copy)]
pub struct RngState {
    pub seed: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed }
    }

    pub fn stream_for(&self, node: NodeId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node.stream_id());
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeId;
    use rand::Rng;

    fn n() -> NodeId {
        NodeId::mn(1)
    }

    #[test]
    fn event_at_zero_fires_first() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_millis(1), n(), 'b').unwrap();
        s.schedule(SimTime::ZERO, n(), 'a').unwrap();
        let mut seen = vec![];
        s.run_until(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, vec!['a', 'b']);
    }

    #[test]
    fn equal_timestamps_fire_in_insertion_order() {
        let mut s = Scheduler::new();
        let t = SimTime::from_millis(5);
        for i in 0..10 {
            s.schedule(t, n(), i).unwrap();
        }
        let mut seen = vec![];
        s.run_until(t, |_, ev| seen.push(ev.payload));
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.run_until(SimTime::from_micros(10), |_, _| {});
        let err = s.schedule(SimTime::from_micros(9), n(), ()).unwrap_err();
        assert_eq!(
            err,
            SimError::SchedulingInPast {
                at: SimTime::from_micros(9),
                now: SimTime::from_micros(10)
            }
        );
    }

    #[test]
    fn cancel_contract() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime::from_millis(3), n(), 1).unwrap();
        let fired = s.schedule(SimTime::from_millis(1), n(), 2).unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        let mut seen = vec![];
        s.run_until(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, vec![2]);
        assert!(!s.cancel(fired));
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut s: Scheduler<()> = Scheduler::new();
        let stats = s.run_until(SimTime::from_secs(20), |_, _| {});
        assert_eq!(s.now(), SimTime::from_secs(20));
        assert_eq!(stats.processed, 0);
    }

    #[test]
    fn single_event_processed_and_clock_parks_at_end() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(5), n(), ()).unwrap();
        let stats = s.run_until(SimTime::from_secs(20), |_, _| {});
        assert_eq!(stats.processed, 1);
        assert_eq!(s.now(), SimTime::from_secs(20));
    }

    #[test]
    fn follow_up_within_horizon_is_processed() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), n(), 0u32).unwrap();
        let mut seen = vec![];
        s.run_until(SimTime::from_secs(10), |sched, ev| {
            seen.push((ev.fire_at, ev.payload));
            if ev.payload < 3 {
                sched.schedule_in(Duration::from_secs(2), n(), ev.payload + 1);
            }
        });
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[3].0, SimTime::from_secs(7));
    }

    #[test]
    fn streams_are_independent_of_draw_order() {
        let rng = RngState::new(7);
        let mut a1 = rng.stream_for(NodeId::mn(1));
        let mut a2 = rng.stream_for(NodeId::mn(2));
        let x1: u64 = a1.random();
        let x2: u64 = a2.random();
        let mut b2 = rng.stream_for(NodeId::mn(2));
        let mut b1 = rng.stream_for(NodeId::mn(1));
        assert_eq!(x2, b2.random::<u64>());
        assert_eq!(x1, b1.random::<u64>());
        assert_ne!(x1, x2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clock_monotone_and_no_event_loss(
                times in proptest::collection::vec(0u64..10_000, 1..200),
                cancel_mask in proptest::collection::vec(any::<bool>(), 200),
                end in 0u64..12_000,
            ) {
                let mut s = Scheduler::new();
                let handles: Vec<_> = times
                    .iter()
                    .map(|&t| s.schedule(SimTime::from_micros(t), n(), t).unwrap())
                    .collect();
                for (h, &c) in handles.iter().zip(&cancel_mask) {
                    if c {
                        s.cancel(*h);
                    }
                }
                let mut last = SimTime::ZERO;
                let stats = s.run_until(SimTime::from_micros(end), |_, ev| {
                    assert!(ev.fire_at >= last);
                    last = ev.fire_at;
                });
                prop_assert_eq!(stats.scheduled, stats.processed + stats.cancelled + stats.pending);
            }
        }
    }
}
