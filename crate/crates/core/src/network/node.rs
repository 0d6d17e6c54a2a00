use std::fmt;

use crate::engine::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Mn,
    Ap,
    Bs,
    Ar,
    Cn,
}

/// Node identity. Indices are 1-based to match the usual MN1/AP1 naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: u16,
}

impl NodeId {
    pub const fn new(kind: NodeKind, index: u16) -> Self {
        NodeId { kind, index }
    }

    pub const fn mn(index: u16) -> Self {
        Self::new(NodeKind::Mn, index)
    }

    pub const fn ap(index: u16) -> Self {
        Self::new(NodeKind::Ap, index)
    }

    pub const BS: NodeId = NodeId::new(NodeKind::Bs, 1);
    pub const AR: NodeId = NodeId::new(NodeKind::Ar, 1);
    pub const CN: NodeId = NodeId::new(NodeKind::Cn, 1);

    pub fn is_ap(&self) -> bool {
        self.kind == NodeKind::Ap
    }

    pub fn is_mn(&self) -> bool {
        self.kind == NodeKind::Mn
    }

    /// Zero-based slot for per-kind vectors.
    pub fn slot(&self) -> usize {
        self.index as usize - 1
    }

    /// Distinct RNG stream per node.
    pub fn stream_id(&self) -> u64 {
        ((self.kind as u64) << 16) | self.index as u64
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NodeKind::Mn => write!(f, "MN{}", self.index),
            NodeKind::Ap => write!(f, "AP{}", self.index),
            NodeKind::Bs => f.write_str("BS"),
            NodeKind::Ar => f.write_str("AR"),
            NodeKind::Cn => f.write_str("CN"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Data,
    Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub flow_id: u32,
    pub size_bytes: u32,
    pub created_at: SimTime,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: PacketKind,
    /// Attachment (AP or BS) that carried the packet over the air.
    pub via: Option<NodeId>,
}

impl Packet {
    pub fn bits(&self) -> u64 {
        self.size_bytes as u64 * 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_names() {
        assert_eq!(NodeId::mn(3).to_string(), "MN3");
        assert_eq!(NodeId::ap(2).to_string(), "AP2");
        assert_eq!(NodeId::BS.to_string(), "BS");
        assert_ne!(NodeId::mn(1).stream_id(), NodeId::ap(1).stream_id());
    }
}
