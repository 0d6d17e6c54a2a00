use std::time::Duration;

use thiserror::Error;

use super::NodeId;
use crate::engine::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no wired link between {0} and {1}")]
pub struct NoSuchLink(pub NodeId, pub NodeId);

/// Full-duplex point-to-point link. Each direction serializes frames
/// back-to-back, so a burst queues behind the previous frame.
#[derive(Debug, Clone)]
pub struct WiredLink {
    pub endpoints: (NodeId, NodeId),
    pub bandwidth_bps: u64,
    pub delay: Duration,
    busy_until: [SimTime; 2],
}

impl WiredLink {
    pub fn new(a: NodeId, b: NodeId, bandwidth_bps: u64, delay: Duration) -> Self {
        WiredLink {
            endpoints: (a, b),
            bandwidth_bps,
            delay,
            busy_until: [SimTime::ZERO; 2],
        }
    }

    pub fn serialization(&self, size_bytes: u32) -> Duration {
        let ns = size_bytes as u128 * 8 * 1_000_000_000 / self.bandwidth_bps as u128;
        Duration::from_nanos(ns as u64)
    }

    fn direction(&self, from: NodeId, to: NodeId) -> Option<usize> {
        match self.endpoints {
            (a, b) if a == from && b == to => Some(0),
            (a, b) if b == from && a == to => Some(1),
            _ => None,
        }
    }

    /// Sends a frame and returns its arrival time at the far end.
    pub fn transmit(
        &mut self,
        from: NodeId,
        to: NodeId,
        size_bytes: u32,
        now: SimTime,
    ) -> Result<SimTime, NoSuchLink> {
        let dir = self.direction(from, to).ok_or(NoSuchLink(from, to))?;
        let start = now.max(self.busy_until[dir]);
        let done = start + self.serialization(size_bytes);
        self.busy_until[dir] = done;
        Ok(done + self.delay)
    }
}

/// Star backbone: every wired node hangs off the access router.
#[derive(Debug, Clone, Default)]
pub struct Backbone {
    links: Vec<WiredLink>,
}

impl Backbone {
    pub fn add(&mut self, link: WiredLink) {
        self.links.push(link);
    }

    pub fn link_mut(&mut self, a: NodeId, b: NodeId) -> Result<&mut WiredLink, NoSuchLink> {
        self.links
            .iter_mut()
            .find(|l| l.endpoints == (a, b) || l.endpoints == (b, a))
            .ok_or(NoSuchLink(a, b))
    }

    /// Next hop from `at` toward `dst`.
    pub fn next_hop(&self, at: NodeId, dst: NodeId) -> NodeId {
        if at == NodeId::AR {
            dst
        } else {
            NodeId::AR
        }
    }

    pub fn transmit(
        &mut self,
        from: NodeId,
        to: NodeId,
        size_bytes: u32,
        now: SimTime,
    ) -> Result<SimTime, NoSuchLink> {
        self.link_mut(from, to)?.transmit(from, to, size_bytes, now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backbone() -> WiredLink {
        WiredLink::new(NodeId::ap(1), NodeId::AR, 100_000_000, Duration::from_millis(2))
    }

    #[test]
    fn data_frame_over_backbone() {
        let mut l = backbone();
        let now = SimTime::from_secs(1);
        let at = l.transmit(NodeId::ap(1), NodeId::AR, 1500, now).unwrap();
        assert_eq!(at - now, Duration::from_micros(120 + 2000));
    }

    #[test]
    fn small_control_frame() {
        let mut l = backbone();
        let at = l.transmit(NodeId::AR, NodeId::ap(1), 64, SimTime::ZERO).unwrap();
        assert_eq!(WiredLink::new(NodeId::AR, NodeId::ap(1), 100_000_000, Duration::ZERO).serialization(64), Duration::from_nanos(5_120));
        // Sub-microsecond part truncates at the SimTime boundary.
        assert_eq!(at.as_micros(), 2005);
    }

    #[test]
    fn bs_uplink() {
        let mut l = WiredLink::new(NodeId::BS, NodeId::AR, 10_000_000, Duration::from_millis(2));
        let at = l.transmit(NodeId::BS, NodeId::AR, 1500, SimTime::ZERO).unwrap();
        assert_eq!(at.as_micros(), 1200 + 2000);
    }

    #[test]
    fn back_to_back_frames_serialize_and_directions_are_independent() {
        let mut l = backbone();
        let a = l.transmit(NodeId::ap(1), NodeId::AR, 1500, SimTime::ZERO).unwrap();
        let b = l.transmit(NodeId::ap(1), NodeId::AR, 1500, SimTime::ZERO).unwrap();
        assert_eq!(b - a, Duration::from_micros(120));
        let c = l.transmit(NodeId::AR, NodeId::ap(1), 1500, SimTime::ZERO).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn missing_link() {
        let mut bb = Backbone::default();
        bb.add(backbone());
        assert_eq!(
            bb.transmit(NodeId::ap(2), NodeId::AR, 10, SimTime::ZERO).unwrap_err(),
            NoSuchLink(NodeId::ap(2), NodeId::AR)
        );
        assert_eq!(bb.next_hop(NodeId::ap(2), NodeId::ap(1)), NodeId::AR);
        assert_eq!(bb.next_hop(NodeId::AR, NodeId::ap(1)), NodeId::ap(1));
    }
}
