use std::collections::VecDeque;
use std::time::Duration;

use crate::engine::SimTime;

/// Bits per second.
pub type BitRate = f64;

/// Traffic volume over a trailing window. Used both for AP/BS load and
/// for an MN's own offered load.
#[derive(Debug, Clone)]
pub struct LoadMeter {
    window: Duration,
    samples: VecDeque<(SimTime, u64)>,
    bits_in_window: u64,
}

impl LoadMeter {
    pub fn new(window: Duration) -> Self {
        assert!(!window.is_zero(), "load window must be positive");
        LoadMeter {
            window,
            samples: VecDeque::new(),
            bits_in_window: 0,
        }
    }

    pub fn window(&self) -> Duration {
        self.window
    }

    pub fn record(&mut self, now: SimTime, bits: u64) {
        self.samples.push_back((now, bits));
        self.bits_in_window += bits;
    }

    /// Bits seen in `(now - window, now]` divided by the window length.
    pub fn measure(&mut self, now: SimTime) -> BitRate {
        self.expire(now);
        self.bits_in_window as f64 / self.window.as_secs_f64()
    }

    fn expire(&mut self, now: SimTime) {
        let Some(cutoff) = now.checked_sub(self.window) else {
            return;
        };
        while let Some(&(t, bits)) = self.samples.front() {
            if t > cutoff {
                break;
            }
            self.samples.pop_front();
            self.bits_in_window -= bits;
        }
    }
}
