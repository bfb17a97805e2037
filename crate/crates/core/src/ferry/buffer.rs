//! Capacity-bounded message store ordered by forwarding priority.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::BufferError;
use crate::model::{Message, MessageId, NodeId, SimTime};

/// Higher gravity first, then older, then lower id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityKey {
    pub gravity: f64,
    pub created_at: SimTime,
    pub id: MessageId,
}

impl PriorityKey {
    pub fn of(m: &Message) -> Self {
        Self {
            gravity: m.gravity,
            created_at: m.created_at,
            id: m.id,
        }
    }
}

impl Eq for PriorityKey {}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .gravity
            .total_cmp(&self.gravity)
            .then(self.created_at.cmp(&other.created_at))
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct MessageBuffer {
    owner: NodeId,
    capacity_bits: u64,
    used_bits: u64,
    reserved_bits: u64,
    peak_bits: u64,
    messages: BTreeMap<PriorityKey, Message>,
    index: BTreeMap<MessageId, PriorityKey>,
}

impl MessageBuffer {
    pub fn new(owner: NodeId, capacity_bits: u64) -> Self {
        Self {
            owner,
            capacity_bits,
            used_bits: 0,
            reserved_bits: 0,
            peak_bits: 0,
            messages: BTreeMap::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn capacity_bits(&self) -> u64 {
        self.capacity_bits
    }

    pub fn used_bits(&self) -> u64 {
        self.used_bits
    }

    pub fn reserved_bits(&self) -> u64 {
        self.reserved_bits
    }

    /// Highest `used_bits` ever observed.
    pub fn peak_bits(&self) -> u64 {
        self.peak_bits
    }

    pub fn free_bits(&self) -> u64 {
        self.capacity_bits - self.used_bits - self.reserved_bits
    }

    pub fn fits(&self, bits: u64) -> bool {
        bits <= self.free_bits()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: MessageId) -> Option<&Message> {
        self.index.get(&id).and_then(|k| self.messages.get(k))
    }

    /// Messages in forwarding order.
    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.messages.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.index.keys().copied()
    }

    pub fn insert(&mut self, message: Message) -> Result<(), BufferError> {
        if !self.fits(message.size_bits) {
            return Err(BufferError::Full {
                owner: self.owner,
                needed: message.size_bits,
                free: self.free_bits(),
            });
        }
        self.store(message)
    }

    /// Stores a message whose space was held by [`reserve`](Self::reserve).
    pub fn insert_reserved(&mut self, message: Message) -> Result<(), BufferError> {
        assert!(
            self.reserved_bits >= message.size_bits,
            "insert_reserved without a matching reservation"
        );
        if self.contains(message.id) {
            return Err(BufferError::Duplicate(message.id));
        }
        self.reserved_bits -= message.size_bits;
        self.store(message)
    }

    fn store(&mut self, message: Message) -> Result<(), BufferError> {
        if self.contains(message.id) {
            return Err(BufferError::Duplicate(message.id));
        }
        let key = PriorityKey::of(&message);
        self.used_bits += message.size_bits;
        self.peak_bits = self.peak_bits.max(self.used_bits);
        self.index.insert(message.id, key);
        self.messages.insert(key, message);
        Ok(())
    }

    pub fn reserve(&mut self, bits: u64) -> bool {
        if !self.fits(bits) {
            return false;
        }
        self.reserved_bits += bits;
        true
    }

    pub fn release(&mut self, bits: u64) {
        assert!(self.reserved_bits >= bits, "releasing more than reserved");
        self.reserved_bits -= bits;
    }

    pub fn remove(&mut self, id: MessageId) -> Option<Message> {
        let key = self.index.remove(&id)?;
        let message = self.messages.remove(&key).expect("index and store agree");
        self.used_bits -= message.size_bits;
        Some(message)
    }

    /// Recomputes occupancy from the stored messages.
    pub fn audit(&self) -> Result<(), String> {
        let sum: u64 = self.messages.values().map(|m| m.size_bits).sum();
        if sum != self.used_bits {
            return Err(format!(
                "{}: used_bits {} but messages sum to {sum}",
                self.owner, self.used_bits
            ));
        }
        if self.used_bits + self.reserved_bits > self.capacity_bits {
            return Err(format!("{}: over capacity", self.owner));
        }
        if self.index.len() != self.messages.len() {
            return Err(format!("{}: index out of sync", self.owner));
        }
        Ok(())
    }
}
