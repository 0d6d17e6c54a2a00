use std::time::Duration;

use super::{NodeId, Packet, PacketKind};
use crate::engine::SimTime;

/// Constant-bit-rate UDP source. The flow only knows where it is going;
/// which AP or BS carries it is the owning MN's business, so a handoff
/// does not touch packet numbering.
#[derive(Debug, Clone)]
pub struct CbrFlow {
    pub id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub packet_size_bytes: u32,
    pub interval: Duration,
    pub start_at: SimTime,
    pub attachment: Option<NodeId>,
    generated: u64,
}

impl CbrFlow {
    pub fn new(
        id: u32,
        src: NodeId,
        dst: NodeId,
        packet_size_bytes: u32,
        interval: Duration,
        start_at: SimTime,
    ) -> Self {
        CbrFlow {
            id,
            src,
            dst,
            packet_size_bytes,
            interval,
            start_at,
            attachment: None,
            generated: 0,
        }
    }

    pub fn offered_bps(&self) -> f64 {
        self.packet_size_bytes as f64 * 8.0 / self.interval.as_secs_f64()
    }

    pub fn generated(&self) -> u64 {
        self.generated
    }

    /// Builds the next packet; the caller schedules the following emission
    /// at `next_emission`.
    pub fn emit(&mut self, packet_id: u64, now: SimTime) -> Packet {
        self.generated += 1;
        Packet {
            id: packet_id,
            flow_id: self.id,
            size_bytes: self.packet_size_bytes,
            created_at: now,
            src: self.src,
            dst: self.dst,
            kind: PacketKind::Data,
            via: None,
        }
    }

    pub fn next_emission(&self, now: SimTime) -> SimTime {
        now + self.interval
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_ms_interval_is_fifty_packets_or_600_kbps() {
        let f = CbrFlow::new(1, NodeId::mn(1), NodeId::CN, 1500, Duration::from_millis(20), SimTime::ZERO);
        assert_eq!(f.offered_bps(), 600_000.0);
        let mut t = f.start_at;
        let mut n = 0;
        while t < SimTime::from_secs(1) {
            n += 1;
            t = f.next_emission(t);
        }
        assert_eq!(n, 50);
    }

    #[test]
    fn ids_continue_across_reattachment() {
        let mut f = CbrFlow::new(3, NodeId::mn(3), NodeId::CN, 1500, Duration::from_millis(20), SimTime::from_secs(3));
        f.attachment = Some(NodeId::ap(1));
        let a = f.emit(10, SimTime::from_secs(3));
        f.attachment = Some(NodeId::BS);
        let b = f.emit(11, SimTime::from_secs(3) + f.interval);
        assert_eq!((a.flow_id, b.flow_id), (3, 3));
        assert_eq!(f.generated(), 2);
        assert_eq!(b.created_at - a.created_at, Duration::from_millis(20));
    }
}
