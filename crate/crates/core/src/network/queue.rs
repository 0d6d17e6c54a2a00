//! Drop-tail interface queue shared by every station of one channel.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use super::{NodeId, Packet};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("interface queue full")]
pub struct QueueFull;

#[derive(Debug, Clone)]
pub struct InterfaceQueue {
    capacity: usize,
    contents: VecDeque<Packet>,
    per_src: BTreeMap<NodeId, usize>,
    drop_count: u64,
}

impl InterfaceQueue {
    pub fn new(capacity: usize) -> Self {
        InterfaceQueue {
            capacity,
            contents: VecDeque::with_capacity(capacity),
            per_src: BTreeMap::new(),
            drop_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn drop_count(&self) -> u64 {
        self.drop_count
    }

    /// Packets from `src` currently waiting.
    pub fn count_from(&self, src: NodeId) -> usize {
        self.per_src.get(&src).copied().unwrap_or(0)
    }

    pub fn enqueue(&mut self, pkt: Packet) -> Result<(), QueueFull> {
        if self.contents.len() >= self.capacity {
            self.drop_count += 1;
            return Err(QueueFull);
        }
        *self.per_src.entry(pkt.src).or_default() += 1;
        self.contents.push_back(pkt);
        Ok(())
    }

    /// Removes the oldest packet whose source satisfies `eligible`.
    pub fn take_first<F: Fn(NodeId) -> bool>(&mut self, eligible: F) -> Option<Packet> {
        let pos = self.contents.iter().position(|p| eligible(p.src))?;
        let pkt = self.contents.remove(pos)?;
        self.forget(pkt.src);
        Some(pkt)
    }

    /// Pulls every packet from `src` out of the queue, preserving order.
    pub fn remove_from(&mut self, src: NodeId) -> Vec<Packet> {
        let mut taken = Vec::new();
        self.contents.retain(|p| {
            if p.src == src {
                taken.push(p.clone());
                false
            } else {
                true
            }
        });
        self.per_src.remove(&src);
        taken
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.contents.iter()
    }

    fn forget(&mut self, src: NodeId) {
        if let Some(c) = self.per_src.get_mut(&src) {
            *c -= 1;
            if *c == 0 {
                self.per_src.remove(&src);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimTime;
    use crate::network::PacketKind;
    use proptest::prelude::*;

    fn pkt(id: u64, src: u16) -> Packet {
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
    fn full_queue_drops_tail() {
        let mut q = InterfaceQueue::new(100);
        for i in 0..100 {
            q.enqueue(pkt(i, 1)).unwrap();
        }
        assert_eq!(q.enqueue(pkt(100, 1)), Err(QueueFull));
        assert_eq!(q.drop_count(), 1);
        assert_eq!(q.len(), 100);
    }

    #[test]
    fn take_first_skips_ineligible_sources() {
        let mut q = InterfaceQueue::new(10);
        q.enqueue(pkt(1, 1)).unwrap();
        q.enqueue(pkt(2, 2)).unwrap();
        q.enqueue(pkt(3, 1)).unwrap();
        let p = q.take_first(|s| s != NodeId::mn(1)).unwrap();
        assert_eq!(p.id, 2);
        assert_eq!(q.count_from(NodeId::mn(1)), 2);
        assert_eq!(q.remove_from(NodeId::mn(1)).iter().map(|p| p.id).collect::<Vec<_>>(), vec![1, 3]);
        assert!(q.is_empty());
    }

    proptest! {
        #[test]
        fn queue_law(ops in proptest::collection::vec((any::<bool>(), 1u16..4), 1..500), cap in 1usize..20) {
            let mut q = InterfaceQueue::new(cap);
            let mut drops = 0;
            for (i, (push, src)) in ops.into_iter().enumerate() {
                if push {
                    let was_full = q.len() == cap;
                    let r = q.enqueue(pkt(i as u64, src));
                    prop_assert_eq!(r.is_err(), was_full);
                    if was_full { drops += 1; }
                } else {
                    q.take_first(|_| true);
                }
                prop_assert!(q.len() <= cap);
                let sum: usize = (1..4).map(|s| q.count_from(NodeId::mn(s))).sum();
                prop_assert_eq!(sum, q.len());
            }
            prop_assert_eq!(q.drop_count(), drops);
        }
    }
}
