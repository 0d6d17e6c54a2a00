//! Degradation sensing at the mobile node.
//!
//! Two detectors: a windowed packet-drop rate and an exponentially weighted
//! moving average of the interface queue length. Both are edge-triggered and
//! strict: a value sitting exactly on the threshold never fires.

use std::collections::VecDeque;
use std::time::Duration;

use crate::engine::SimTime;

/// Samples taken before any trigger is allowed.
pub const WARMUP_SAMPLES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    DropRate,
    Ewma,
}

/// Fires once per upward crossing. Falling back to or below the threshold
/// re-arms it; `rearm` forces it after an abandoned handoff attempt.
#[derive(Debug, Clone, Copy)]
pub struct EdgeTrigger {
    armed: bool,
}

impl Default for EdgeTrigger {
    fn default() -> Self {
        EdgeTrigger { armed: true }
    }
}

impl EdgeTrigger {
    pub fn observe(&mut self, above: bool) -> bool {
        if !above {
            self.armed = true;
            return false;
        }
        std::mem::replace(&mut self.armed, false)
    }

    pub fn rearm(&mut self) {
        self.armed = true;
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }
}

#[derive(Debug, Clone)]
pub struct EwmaTracker {
    alpha: f64,
    value: Option<f64>,
    samples_seen: u32,
    threshold: f64,
    edge: EdgeTrigger,
}

impl EwmaTracker {
    pub fn new(alpha: f64, threshold: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
        EwmaTracker {
            alpha,
            value: None,
            samples_seen: 0,
            threshold,
            edge: EdgeTrigger::default(),
        }
    }

    /// Tracker past warm-up with a known previous average.
    pub fn with_value(alpha: f64, threshold: f64, value: f64) -> Self {
        let mut t = Self::new(alpha, threshold);
        t.value = Some(value);
        t.samples_seen = WARMUP_SAMPLES;
        t
    }

    pub fn value(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }

    pub fn samples_seen(&self) -> u32 {
        self.samples_seen
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn warmed_up(&self) -> bool {
        self.samples_seen > WARMUP_SAMPLES
    }

    /// Folds in the queue length observed one sample period ago.
    pub fn update(&mut self, y_prev: f64) -> f64 {
        let e = match self.value {
            None => y_prev,
            Some(e) => self.alpha * y_prev + (1.0 - self.alpha) * e,
        };
        self.value = Some(e);
        self.samples_seen += 1;
        e
    }

    /// True on the sample where the average first exceeds the threshold.
    pub fn crossed(&mut self) -> bool {
        if !self.warmed_up() {
            return false;
        }
        self.edge.observe(self.value() > self.threshold)
    }

    pub fn rearm(&mut self) {
        self.edge.rearm();
    }

    /// Fresh start, e.g. after the MN changed attachment.
    pub fn reset(&mut self) {
        *self = Self::new(self.alpha, self.threshold);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Sent,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropUpdate {
    pub rate: f64,
    pub triggered: bool,
}

#[derive(Debug, Clone)]
pub struct DropRateTracker {
    window: Duration,
    outcomes: VecDeque<(SimTime, SendOutcome)>,
    drops_in_window: u32,
    threshold_fraction: f64,
    edge: EdgeTrigger,
}

impl DropRateTracker {
    pub fn new(window: Duration, threshold_fraction: f64) -> Self {
        DropRateTracker {
            window,
            outcomes: VecDeque::new(),
            drops_in_window: 0,
            threshold_fraction,
            edge: EdgeTrigger::default(),
        }
    }

    pub fn attempts_in_window(&self) -> usize {
        self.outcomes.len()
    }

    pub fn drops_in_window(&self) -> u32 {
        self.drops_in_window
    }

    /// Drops over attempts in the trailing window; zero for an empty window.
    pub fn rate(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.drops_in_window as f64 / self.outcomes.len() as f64
        }
    }

    pub fn record(&mut self, now: SimTime, outcome: SendOutcome) -> DropUpdate {
        self.advance(now);
        self.outcomes.push_back((now, outcome));
        if outcome == SendOutcome::Dropped {
            self.drops_in_window += 1;
        }
        let rate = self.rate();
        let triggered = self.edge.observe(rate > self.threshold_fraction);
        DropUpdate { rate, triggered }
    }

    fn advance(&mut self, now: SimTime) {
        let Some(cutoff) = now.checked_sub(self.window) else {
            return;
        };
        while let Some(&(t, o)) = self.outcomes.front() {
            if t > cutoff {
                break;
            }
            self.outcomes.pop_front();
            if o == SendOutcome::Dropped {
                self.drops_in_window -= 1;
            }
        }
    }

    pub fn rearm(&mut self) {
        self.edge.rearm();
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.window, self.threshold_fraction);
    }
}
