//! Effective-capacity MAC: one FIFO server per AP (or BS) channel.
//!
//! A frame occupies the medium for `bits / effective_capacity + overhead`.
//! Management/control frames jump ahead of queued data. A frame whose
//! station is not currently tuned to the channel is skipped, not dropped.

use std::collections::VecDeque;
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use super::queue::{InterfaceQueue, QueueFull};
use super::{NodeId, Packet};
use crate::engine::SimTime;
use crate::handoff::ControlMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(u8);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("channel {0} outside 1..=11")]
pub struct InvalidChannel(pub u8);

impl ChannelId {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 11;

    pub fn new(id: u8) -> Result<Self, InvalidChannel> {
        if (Self::MIN..=Self::MAX).contains(&id) {
            Ok(ChannelId(id))
        } else {
            Err(InvalidChannel(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// 22 MHz channels on a 5 MHz raster overlap when fewer than five apart.
    pub fn overlaps(self, other: ChannelId) -> bool {
        self.0.abs_diff(other.0) <= 4
    }

    pub fn all() -> impl Iterator<Item = ChannelId> {
        (Self::MIN..=Self::MAX).map(ChannelId)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ch{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WirelessChannel {
    pub channel_id: ChannelId,
    pub effective_capacity_bps: u64,
    pub mac_overhead_per_packet: Duration,
}

impl WirelessChannel {
    /// Airtime for one frame, rounded to the nearest microsecond.
    pub fn service_time(&self, size_bytes: u32) -> Duration {
        let bits = size_bytes as f64 * 8.0;
        let us = (bits * 1e6 / self.effective_capacity_bps as f64).round() as u64;
        Duration::from_micros(us) + self.mac_overhead_per_packet
    }
}

/// Management frame carried over the air or the backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFrame {
    pub src: NodeId,
    pub dst: NodeId,
    pub created_at: SimTime,
    pub size_bytes: u32,
    pub msg: ControlMessage,
}

impl ControlFrame {
    /// The mobile end of a wireless control exchange.
    pub fn station(&self) -> NodeId {
        if self.src.is_mn() {
            self.src
        } else {
            self.dst
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Data(Packet),
    Control(ControlFrame),
}

impl Frame {
    pub fn size_bytes(&self) -> u32 {
        match self {
            Frame::Data(p) => p.size_bytes,
            Frame::Control(c) => c.size_bytes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelServer {
    owner: NodeId,
    channel: WirelessChannel,
    data: InterfaceQueue,
    control: VecDeque<ControlFrame>,
    in_service: Option<Frame>,
}

impl ChannelServer {
    pub fn new(owner: NodeId, channel: WirelessChannel, queue_capacity: usize) -> Self {
        ChannelServer {
            owner,
            channel,
            data: InterfaceQueue::new(queue_capacity),
            control: VecDeque::new(),
            in_service: None,
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn channel(&self) -> &WirelessChannel {
        &self.channel
    }

    pub fn queue(&self) -> &InterfaceQueue {
        &self.data
    }

    /// Data frame from a station. Drop-tail on a full queue.
    pub fn offer(&mut self, pkt: Packet) -> Result<(), QueueFull> {
        self.data.enqueue(pkt)
    }

    pub fn push_control(&mut self, frame: ControlFrame) {
        self.control.push_back(frame);
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn in_service(&self) -> Option<&Frame> {
        self.in_service.as_ref()
    }

    /// Starts serving the next eligible frame, returning its airtime.
    pub fn start_next<F: Fn(NodeId) -> bool>(&mut self, present: F) -> Option<Duration> {
        if self.in_service.is_some() {
            return None;
        }
        let frame = if let Some(pos) = self.control.iter().position(|c| present(c.station())) {
            Frame::Control(self.control.remove(pos)?)
        } else {
            Frame::Data(self.data.take_first(&present)?)
        };
        let t = self.channel.service_time(frame.size_bytes());
        self.in_service = Some(frame);
        Some(t)
    }

    pub fn finish(&mut self) -> Option<Frame> {
        self.in_service.take()
    }

    /// Data frames belonging to `mn`, including one on the air.
    pub fn backlog_of(&self, mn: NodeId) -> usize {
        let on_air = matches!(&self.in_service, Some(Frame::Data(p)) if p.src == mn);
        self.data.count_from(mn) + on_air as usize
    }

    pub fn is_transmitting(&self, mn: NodeId) -> bool {
        matches!(&self.in_service, Some(Frame::Data(p)) if p.src == mn)
    }

    pub fn withdraw(&mut self, mn: NodeId) -> Vec<Packet> {
        self.data.remove_from(mn)
    }

    /// Discards queued management frames to or from `mn`.
    pub fn purge_control(&mut self, mn: NodeId) -> usize {
        let before = self.control.len();
        self.control.retain(|c| c.station() != mn);
        before - self.control.len()
    }

    /// Data packets held here (queued or on the air).
    pub fn data_packets(&self) -> impl Iterator<Item = &Packet> {
        let on_air = match &self.in_service {
            Some(Frame::Data(p)) => Some(p),
            _ => None,
        };
        self.data.iter().chain(on_air)
    }

    pub fn drop_count(&self) -> u64 {
        self.data.drop_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PacketKind;

    fn chan(cap: u64, overhead_us: u64) -> WirelessChannel {
        WirelessChannel {
            channel_id: ChannelId::new(1).unwrap(),
            effective_capacity_bps: cap,
            mac_overhead_per_packet: Duration::from_micros(overhead_us),
        }
    }

    fn data(id: u64, src: u16) -> Packet {
        Packet {
            id,
            flow_id: src as u32,
            size_bytes: 1500,
            created_at: SimTime::ZERO,
            src: NodeId::mn(src),
            dst: NodeId::CN,
            kind: PacketKind::Data,
            via: None,
        }
    }

    #[test]
    fn service_time_of_full_frame() {
        // 1500 * 8 / 4.2e6 s = 2857.142... us
        assert_eq!(chan(4_200_000, 0).service_time(1500), Duration::from_micros(2857));
        assert_eq!(chan(4_200_000, 100).service_time(1500), Duration::from_micros(2957));
    }

    #[test]
    fn channel_bounds_and_overlap() {
        assert!(ChannelId::new(0).is_err());
        assert!(ChannelId::new(12).is_err());
        let c = |n| ChannelId::new(n).unwrap();
        assert!(c(1).overlaps(c(5)));
        assert!(!c(1).overlaps(c(6)));
        assert!(!c(6).overlaps(c(11)));
    }

    #[test]
    fn control_preempts_data_and_absent_stations_wait() {
        let mut s = ChannelServer::new(NodeId::ap(1), chan(4_200_000, 0), 10);
        s.offer(data(1, 1)).unwrap();
        s.offer(data(2, 2)).unwrap();
        s.push_control(ControlFrame {
            src: NodeId::ap(1),
            dst: NodeId::mn(1),
            created_at: SimTime::ZERO,
            size_bytes: 128,
            msg: ControlMessage::LoadRequest,
        });
        // MN1 is away: its control and data both wait.
        let t = s.start_next(|n| n != NodeId::mn(1)).unwrap();
        assert_eq!(t, Duration::from_micros(2857));
        assert!(matches!(s.finish(), Some(Frame::Data(p)) if p.id == 2));
        s.start_next(|_| true).unwrap();
        assert!(matches!(s.finish(), Some(Frame::Control(_))));
        assert_eq!(s.backlog_of(NodeId::mn(1)), 1);
    }
}
