//! WLAN to WMAN offload and the way back.

use std::time::Duration;

use crate::network::{BitRate, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct BsAttachment {
    pub bs: NodeId,
    pub entry_complete: bool,
    pub entry_latency: Duration,
    pub flows_transferred: u32,
}

impl BsAttachment {
    pub fn begin(bs: NodeId, entry_latency: Duration) -> Self {
        BsAttachment {
            bs,
            entry_complete: false,
            entry_latency,
            flows_transferred: 0,
        }
    }

    /// Data may only use the BS once entry has finished.
    pub fn can_carry_data(&self) -> bool {
        self.entry_complete
    }
}

/// BS admission: accept while measured load plus the newcomer fits.
pub fn bs_admits(bs_load: BitRate, mn_load: BitRate, capacity: BitRate) -> bool {
    bs_load + mn_load <= capacity
}

/// Spare capacity an AP advertises in a LoadResponse.
pub fn spare_capacity(effective_capacity: BitRate, load: BitRate) -> BitRate {
    (effective_capacity - load).max(0.0)
}

/// An AP is worth returning to when its spare capacity covers the MN plus
/// the same margin used for horizontal candidates.
pub fn return_allowed(spare: BitRate, mn_load: BitRate, delta: BitRate) -> bool {
    spare >= mn_load + delta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn return_when_spare_covers_load_and_margin() {
        // 1.0M >= 0.6M + 0.25M
        assert!(return_allowed(1_000_000.0, 600_000.0, 250_000.0));
        // 0.7M < 0.85M
        assert!(!return_allowed(700_000.0, 600_000.0, 250_000.0));
        assert!(return_allowed(850_000.0, 600_000.0, 250_000.0));
    }

    #[test]
    fn spare_is_capacity_minus_load() {
        assert_eq!(spare_capacity(4_200_000.0, 3_200_000.0), 1_000_000.0);
        assert_eq!(spare_capacity(4_200_000.0, 5_000_000.0), 0.0);
    }

    #[test]
    fn three_offloaded_flows_fit_the_bs() {
        let mut load = 0.0;
        for _ in 0..3 {
            assert!(bs_admits(load, 600_000.0, 10_000_000.0));
            load += 600_000.0;
        }
        assert!(load < 10_000_000.0);
        assert!(!bs_admits(9_500_000.0, 600_000.0, 10_000_000.0));
    }

    #[test]
    fn no_data_before_entry() {
        let mut a = BsAttachment::begin(NodeId::BS, Duration::from_millis(20));
        assert!(!a.can_carry_data());
        a.entry_complete = true;
        assert!(a.can_carry_data());
    }
}
