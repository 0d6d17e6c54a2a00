//! Horizontal handoff protocol: the MN asks its AP to vet the APs it found,
//! the AP polls their load over the backbone and answers with the handoff
//! candidate (HC) list, and the MN picks the strongest candidate.
//!
//! This module holds the message vocabulary and the two state machines as
//! plain data; `world` drives them from simulation events.

use std::time::Duration;

use crate::engine::SimTime;
use crate::network::coverage::strongest;
use crate::network::{BitRate, NodeId};
use crate::scanning::ApEntry;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlMessage {
    MoveRequest { ap_list: Vec<ApEntry>, mn_load: BitRate },
    LoadRequest,
    LoadResponse { load_bps: BitRate, spare_bps: BitRate },
    HandoffTarget { hc_list: Vec<NodeId> },
    DsProbe { mn: NodeId, assoc: NodeId },
    DsProbeResponse { mn: NodeId, entry: ApEntry },
    LoadRequestFromMn { mn_load: BitRate },
    RouteUpdate { mn: NodeId, new_attachment: NodeId },
    AssocRequest,
    AssocResponse,
}

impl ControlMessage {
    pub fn name(&self) -> &'static str {
        match self {
            ControlMessage::MoveRequest { .. } => "MoveRequest",
            ControlMessage::LoadRequest => "LoadRequest",
            ControlMessage::LoadResponse { .. } => "LoadResponse",
            ControlMessage::HandoffTarget { .. } => "HandoffTargetMessage",
            ControlMessage::DsProbe { .. } => "DSProbe",
            ControlMessage::DsProbeResponse { .. } => "DSProbeResponse",
            ControlMessage::LoadRequestFromMn { .. } => "LoadRequestFromMN",
            ControlMessage::RouteUpdate { .. } => "RouteUpdate",
            ControlMessage::AssocRequest => "AssocRequest",
            ControlMessage::AssocResponse => "AssocResponse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcParams {
    pub delta: BitRate,
    pub load_response_timeout: Duration,
}

/// APs that would still be lighter than the current AP by more than `delta`
/// after absorbing the mover: `l_a - m - l_i > delta`. Input order is kept.
pub fn compute_hc(l_a: BitRate, m: BitRate, responses: &[(NodeId, BitRate)], delta: BitRate) -> Vec<NodeId> {
    responses
        .iter()
        .filter(|&&(_, l_i)| l_a - m - l_i > delta)
        .map(|&(id, _)| id)
        .collect()
}

/// Strongest member of `hc_list` according to the scan results.
pub fn choose_target(hc_list: &[NodeId], ap_list: &[ApEntry]) -> Option<NodeId> {
    strongest(
        ap_list
            .iter()
            .filter(|e| hc_list.contains(&e.ap_id))
            .map(|e| (e.ap_id, e.sinr)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnPhase {
    Idle,
    Scanning,
    Requesting,
    AwaitingTarget,
    HandingOff,
    VerticalEntry,
    OnWman,
    Returning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryAction {
    Resend,
    Abandon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetDecision {
    Horizontal(NodeId),
    Vertical(NodeId),
    Backoff,
    /// Not waiting for an answer; stale message.
    Ignore,
}

#[derive(Debug, Clone)]
pub struct MnHandoffState {
    pub phase: MnPhase,
    retries_sent: u32,
    pub n_repeat: u32,
    pub t_repeat: Duration,
    pub ap_list: Vec<ApEntry>,
    pub known_bs: Option<NodeId>,
}

impl MnHandoffState {
    pub fn new(n_repeat: u32, t_repeat: Duration) -> Self {
        MnHandoffState {
            phase: MnPhase::Idle,
            retries_sent: 0,
            n_repeat,
            t_repeat,
            ap_list: Vec::new(),
            known_bs: None,
        }
    }

    pub fn retries_sent(&self) -> u32 {
        self.retries_sent
    }

    /// A degradation trigger. Returns true if a scan cycle should start.
    pub fn on_degradation(&mut self) -> bool {
        if self.phase != MnPhase::Idle {
            return false;
        }
        self.phase = MnPhase::Scanning;
        true
    }

    /// Scan finished: the first MoveRequest goes out now.
    pub fn on_scan_complete(&mut self, ap_list: Vec<ApEntry>) {
        debug_assert_eq!(self.phase, MnPhase::Scanning);
        self.ap_list = ap_list;
        self.phase = MnPhase::Requesting;
        self.retries_sent = 1;
    }

    pub fn on_retry_timer(&mut self) -> RetryAction {
        if self.retries_sent < self.n_repeat {
            self.retries_sent += 1;
            if self.retries_sent == self.n_repeat {
                self.phase = MnPhase::AwaitingTarget;
            }
            RetryAction::Resend
        } else {
            self.phase = MnPhase::Idle;
            self.retries_sent = 0;
            RetryAction::Abandon
        }
    }

    pub fn on_target(&mut self, hc_list: &[NodeId]) -> TargetDecision {
        if !matches!(self.phase, MnPhase::Requesting | MnPhase::AwaitingTarget) {
            return TargetDecision::Ignore;
        }
        self.retries_sent = 0;
        if let Some(t) = choose_target(hc_list, &self.ap_list) {
            self.phase = MnPhase::HandingOff;
            TargetDecision::Horizontal(t)
        } else if let Some(bs) = self.known_bs {
            self.phase = MnPhase::VerticalEntry;
            TargetDecision::Vertical(bs)
        } else {
            self.phase = MnPhase::Idle;
            TargetDecision::Backoff
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingMove {
    pub mn: NodeId,
    pub asked: Vec<NodeId>,
    pub mn_load: BitRate,
    pub responses: Vec<(NodeId, BitRate)>,
    pub deadline: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveRequestDrop {
    /// Inside the suppression window after the last processed request.
    Ignoring,
    /// Another request is already being processed.
    Busy,
}

#[derive(Debug, Clone, Default)]
pub struct ApHandoffState {
    pub ignore_until: SimTime,
    pub pending: Option<PendingMove>,
}

impl ApHandoffState {
    /// Accepts a MoveRequest, returning the APs to poll. `self_id` is never
    /// polled.
    pub fn on_move_request(
        &mut self,
        now: SimTime,
        self_id: NodeId,
        mn: NodeId,
        ap_list: &[ApEntry],
        mn_load: BitRate,
        timeout: Duration,
    ) -> Result<Vec<NodeId>, MoveRequestDrop> {
        if now < self.ignore_until {
            return Err(MoveRequestDrop::Ignoring);
        }
        if self.pending.is_some() {
            return Err(MoveRequestDrop::Busy);
        }
        let mut asked: Vec<NodeId> = Vec::new();
        for e in ap_list {
            if e.ap_id != self_id && !asked.contains(&e.ap_id) {
                asked.push(e.ap_id);
            }
        }
        self.pending = Some(PendingMove {
            mn,
            asked: asked.clone(),
            mn_load,
            responses: Vec::new(),
            deadline: now + timeout,
        });
        Ok(asked)
    }

    /// Returns false for responses that arrive late or unsolicited.
    pub fn on_load_response(&mut self, now: SimTime, from: NodeId, load: BitRate) -> bool {
        match &mut self.pending {
            Some(p) if now < p.deadline && p.asked.contains(&from) => {
                if !p.responses.iter().any(|(id, _)| *id == from) {
                    p.responses.push((from, load));
                }
                true
            }
            _ => false,
        }
    }

    /// Closes the pending request: HC list for the MN, and the suppression
    /// window starts.
    pub fn on_deadline(
        &mut self,
        now: SimTime,
        own_load: BitRate,
        delta: BitRate,
        t_ignore: Duration,
    ) -> Option<(NodeId, Vec<NodeId>)> {
        let p = self.pending.take()?;
        self.ignore_until = now + t_ignore;
        // Keep polling order so the HC list follows the MN's APList.
        let ordered: Vec<_> = p
            .asked
            .iter()
            .filter_map(|id| p.responses.iter().find(|(r, _)| r == id).copied())
            .collect();
        Some((p.mn, compute_hc(own_load, p.mn_load, &ordered, delta)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ChannelId;
    use proptest::prelude::*;

    fn entry(ap: u16, sinr: f64) -> ApEntry {
        ApEntry { ap_id: NodeId::ap(ap), channel: ChannelId::new(11).unwrap(), sinr }
    }

    #[test]
    fn hc_includes_lighter_ap() {
        // 4.0M - 0.6M - 2.0M = 1.4M > 250k
        let hc = compute_hc(4_000_000.0, 600_000.0, &[(NodeId::ap(2), 2_000_000.0)], 250_000.0);
        assert_eq!(hc, vec![NodeId::ap(2)]);
    }

    #[test]
    fn hc_margin_is_strict() {
        let hc = compute_hc(4_000_000.0, 600_000.0, &[(NodeId::ap(2), 3_150_000.0)], 250_000.0);
        assert!(hc.is_empty());
    }

    #[test]
    fn hc_of_nothing_is_empty() {
        assert!(compute_hc(1e7, 0.0, &[], 1.0).is_empty());
    }

    #[test]
    fn strongest_candidate_wins() {
        let ap_list = [entry(2, -60.0), entry(3, -70.0)];
        assert_eq!(choose_target(&[NodeId::ap(2), NodeId::ap(3)], &ap_list), Some(NodeId::ap(2)));
        assert_eq!(choose_target(&[NodeId::ap(3)], &ap_list), Some(NodeId::ap(3)));
        assert_eq!(choose_target(&[], &ap_list), None);
    }

    fn requesting() -> MnHandoffState {
        let mut s = MnHandoffState::new(4, Duration::from_millis(200));
        assert!(s.on_degradation());
        s.on_scan_complete(vec![]);
        s
    }

    #[test]
    fn empty_ap_list_still_requests() {
        let s = requesting();
        assert_eq!(s.phase, MnPhase::Requesting);
        assert_eq!(s.retries_sent(), 1);
    }

    #[test]
    fn trigger_while_busy_is_ignored() {
        let mut s = requesting();
        assert!(!s.on_degradation());
        assert_eq!(s.phase, MnPhase::Requesting);
    }

    #[test]
    fn retries_bounded_then_abandon() {
        let mut s = requesting();
        let mut sent = s.retries_sent();
        loop {
            match s.on_retry_timer() {
                RetryAction::Resend => sent += 1,
                RetryAction::Abandon => break,
            }
        }
        assert_eq!(sent, 4);
        assert_eq!(s.phase, MnPhase::Idle);
        assert!(s.on_degradation());
    }

    #[test]
    fn empty_hc_with_bs_goes_vertical() {
        let mut s = requesting();
        s.known_bs = Some(NodeId::BS);
        assert_eq!(s.on_target(&[]), TargetDecision::Vertical(NodeId::BS));
        assert_eq!(s.phase, MnPhase::VerticalEntry);
    }

    #[test]
    fn empty_hc_without_bs_backs_off() {
        let mut s = requesting();
        assert_eq!(s.on_target(&[]), TargetDecision::Backoff);
        assert_eq!(s.phase, MnPhase::Idle);
    }

    #[test]
    fn stale_target_ignored() {
        let mut s = MnHandoffState::new(4, Duration::from_millis(200));
        assert_eq!(s.on_target(&[NodeId::ap(2)]), TargetDecision::Ignore);
    }

    #[test]
    fn ap_suppresses_within_t_ignore() {
        let mut ap = ApHandoffState::default();
        let t0 = SimTime::from_secs(5);
        let timeout = Duration::from_millis(50);
        let list = [entry(2, 0.0)];
        ap.on_move_request(t0, NodeId::ap(1), NodeId::mn(1), &list, 6e5, timeout).unwrap();
        // Retry from the same MN while pending.
        assert_eq!(
            ap.on_move_request(t0 + Duration::from_millis(10), NodeId::ap(1), NodeId::mn(1), &list, 6e5, timeout),
            Err(MoveRequestDrop::Busy)
        );
        let done = t0 + timeout;
        ap.on_deadline(done, 4e6, 2.5e5, Duration::from_secs(1)).unwrap();
        assert_eq!(
            ap.on_move_request(done + Duration::from_millis(300), NodeId::ap(1), NodeId::mn(2), &list, 6e5, timeout),
            Err(MoveRequestDrop::Ignoring)
        );
        assert!(ap
            .on_move_request(done + Duration::from_secs(1), NodeId::ap(1), NodeId::mn(2), &list, 6e5, timeout)
            .is_ok());
    }

    #[test]
    fn unanswered_poll_uses_what_arrived() {
        let mut ap = ApHandoffState::default();
        let t0 = SimTime::from_secs(1);
        let timeout = Duration::from_millis(50);
        let asked = ap
            .on_move_request(t0, NodeId::ap(1), NodeId::mn(1), &[entry(2, 0.0), entry(3, 0.0), entry(1, 0.0)], 6e5, timeout)
            .unwrap();
        assert_eq!(asked, vec![NodeId::ap(2), NodeId::ap(3)]);
        assert!(ap.on_load_response(t0 + Duration::from_millis(5), NodeId::ap(3), 1e6));
        assert!(!ap.on_load_response(t0 + timeout, NodeId::ap(2), 0.0));
        let (mn, hc) = ap.on_deadline(t0 + timeout, 4e6, 2.5e5, Duration::from_secs(1)).unwrap();
        assert_eq!(mn, NodeId::mn(1));
        assert_eq!(hc, vec![NodeId::ap(3)]);
    }

    // Oracle: brute-force membership test, written independently of the
    // filter in compute_hc.
    fn brute_hc(l_a: f64, m: f64, rs: &[(NodeId, f64)], delta: f64) -> Vec<NodeId> {
        let mut out = Vec::new();
        for i in 0..rs.len() {
            let margin = (l_a - m) - rs[i].1;
            if margin > delta {
                out.push(rs[i].0);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn hc_matches_brute_force(
            l_a in 0.0f64..2e7,
            m in 0.0f64..2e6,
            delta in 1.0f64..1e6,
            loads in proptest::collection::vec(0.0f64..2e7, 0..8),
        ) {
            let rs: Vec<_> = loads.iter().enumerate().map(|(i, &l)| (NodeId::ap(i as u16 + 2), l)).collect();
            prop_assert_eq!(compute_hc(l_a, m, &rs, delta), brute_hc(l_a, m, &rs, delta));
        }
    }
}
