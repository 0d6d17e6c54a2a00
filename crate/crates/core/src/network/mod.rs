//! Nodes, links, channels, queues, traffic and load measurement.

pub mod channel;
pub mod coverage;
pub mod link;
pub mod load;
pub mod node;
pub mod queue;
pub mod traffic;

pub use channel::{ChannelId, ChannelServer, ControlFrame, Frame, WirelessChannel};
pub use coverage::{CoverageModel, Position, RadioParams, SignalQuality};
pub use link::{Backbone, NoSuchLink, WiredLink};
pub use load::{BitRate, LoadMeter};
pub use node::{NodeId, NodeKind, Packet, PacketKind};
pub use queue::{InterfaceQueue, QueueFull};
pub use traffic::CbrFlow;
