//! Interleaved one-channel-at-a-time scanning.
//!
//! Each ScanTimer expiry sends the MN to one foreign channel for a short
//! dwell, broadcasts a DSProbe there and returns. Foreign APs answer through
//! the backbone, so the answer reaches the MN on its home channel.

use crate::network::{ChannelId, NodeId};

/// Every channel that does not overlap `home`, ascending.
pub fn build_channel_list(home: ChannelId) -> Vec<ChannelId> {
    ChannelId::all().filter(|c| !c.overlaps(home)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApEntry {
    pub ap_id: NodeId,
    pub channel: ChannelId,
    pub sinr: f64,
}

/// What a single timer expiry asks the radio to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanStep {
    pub channel: ChannelId,
    /// Last channel of the cycle: do not rearm the timer.
    pub cycle_done: bool,
}

#[derive(Debug, Clone)]
pub struct ScanState {
    channel_list: Vec<ChannelId>,
    next: usize,
    probed: usize,
    ap_list: Vec<ApEntry>,
    home: Option<ChannelId>,
}

impl ScanState {
    /// Cycle over the channels that do not overlap the serving channel.
    pub fn around(home: ChannelId) -> Self {
        ScanState {
            channel_list: build_channel_list(home),
            next: 0,
            probed: 0,
            ap_list: Vec::new(),
            home: Some(home),
        }
    }

    /// Cycle over every channel, for an MN with no WLAN association.
    pub fn unassociated() -> Self {
        ScanState {
            channel_list: ChannelId::all().collect(),
            next: 0,
            probed: 0,
            ap_list: Vec::new(),
            home: None,
        }
    }

    pub fn channel_list(&self) -> &[ChannelId] {
        &self.channel_list
    }

    pub fn home(&self) -> Option<ChannelId> {
        self.home
    }

    pub fn next_channel(&self) -> Option<ChannelId> {
        self.channel_list.get(self.next).copied()
    }

    pub fn ap_list(&self) -> &[ApEntry] {
        &self.ap_list
    }

    pub fn is_complete(&self) -> bool {
        self.probed >= self.channel_list.len()
    }

    /// Advances on a timer expiry. Returns `None` if the cycle already ended
    /// or the list is empty.
    pub fn tick(&mut self) -> Option<ScanStep> {
        if self.is_complete() {
            return None;
        }
        let channel = self.channel_list[self.next];
        self.ap_list.retain(|e| e.channel != channel);
        self.next = (self.next + 1) % self.channel_list.len();
        self.probed += 1;
        Some(ScanStep {
            channel,
            cycle_done: self.is_complete(),
        })
    }

    /// Records a DSProbeResponse; one entry per AP.
    pub fn record(&mut self, entry: ApEntry) {
        match self.ap_list.iter_mut().find(|e| e.ap_id == entry.ap_id) {
            Some(e) => *e = entry,
            None => self.ap_list.push(entry),
        }
    }

    pub fn into_ap_list(self) -> Vec<ApEntry> {
        self.ap_list
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ch(n: u8) -> ChannelId {
        ChannelId::new(n).unwrap()
    }

    fn chans(v: &[u8]) -> Vec<ChannelId> {
        v.iter().map(|&n| ch(n)).collect()
    }

    // Oracle: brute-force |c - home| >= 5 over 1..=11.
    fn oracle(home: u8) -> Vec<ChannelId> {
        (1u8..=11).filter(|&c| (c as i16 - home as i16).abs() >= 5).map(ch).collect()
    }

    #[test]
    fn channel_lists() {
        assert_eq!(build_channel_list(ch(6)), chans(&[1, 11]));
        assert_eq!(build_channel_list(ch(1)), chans(&[6, 7, 8, 9, 10, 11]));
        assert_eq!(build_channel_list(ch(11)), chans(&[1, 2, 3, 4, 5, 6]));
        for h in 1..=11 {
            assert_eq!(build_channel_list(ch(h)), oracle(h));
        }
    }

    #[test]
    fn tick_walks_list_then_completes() {
        let mut s = ScanState::around(ch(6));
        assert_eq!(s.next_channel(), Some(ch(1)));
        assert_eq!(s.tick(), Some(ScanStep { channel: ch(1), cycle_done: false }));
        assert_eq!(s.next_channel(), Some(ch(11)));
        assert_eq!(s.tick(), Some(ScanStep { channel: ch(11), cycle_done: true }));
        assert!(s.is_complete());
        assert_eq!(s.tick(), None);
    }

    #[test]
    fn silent_channel_leaves_list_untouched() {
        let mut s = ScanState::around(ch(1));
        s.tick();
        assert!(s.ap_list().is_empty());
        let e = ApEntry { ap_id: NodeId::ap(2), channel: ch(11), sinr: 20.0 };
        s.record(e);
        s.record(ApEntry { sinr: 21.0, ..e });
        assert_eq!(s.ap_list().len(), 1);
        assert_eq!(s.ap_list()[0].sinr, 21.0);
    }

    #[test]
    fn stale_entries_purged_before_rescan() {
        let mut s = ScanState::around(ch(6));
        s.record(ApEntry { ap_id: NodeId::ap(3), channel: ch(1), sinr: 5.0 });
        s.record(ApEntry { ap_id: NodeId::ap(2), channel: ch(11), sinr: 5.0 });
        s.tick();
        assert_eq!(s.ap_list().iter().map(|e| e.ap_id).collect::<Vec<_>>(), vec![NodeId::ap(2)]);
    }

    #[test]
    fn unassociated_scan_covers_all_channels() {
        let mut s = ScanState::unassociated();
        let mut n = 0;
        while s.tick().is_some() {
            n += 1;
        }
        assert_eq!(n, 11);
    }

    proptest! {
        #[test]
        fn never_emits_overlapping_channel(home in 1u8..=11) {
            let list = build_channel_list(ch(home));
            prop_assert!(!list.contains(&ch(home)));
            for c in &list {
                prop_assert!(c.get().abs_diff(home) >= 5);
            }
            let mut s = ScanState::around(ch(home));
            let mut seen = vec![];
            while let Some(step) = s.tick() {
                prop_assert!(list.contains(&step.channel));
                seen.push(step.channel);
            }
            prop_assert_eq!(seen, list);
        }
    }
}
