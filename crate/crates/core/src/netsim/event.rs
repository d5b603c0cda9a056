use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::ledger::{Block, Hash256, Transaction};

pub type NodeId = usize;

/// Network message body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Tx(Arc<Transaction>),
    Block(Arc<Block>),
}

impl Payload {
    pub fn hash(&self) -> Hash256 {
        match self {
            Payload::Tx(t) => t.hash(),
            Payload::Block(b) => b.hash(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Tx(_) => "tx",
            Payload::Block(_) => "block",
        }
    }
}

/// Sender id used for workload injected at the hub.
pub const HUB: NodeId = usize::MAX;

#[derive(Clone, Debug)]
pub struct Envelope {
    pub from: NodeId,
    pub payload: Payload,
}

#[derive(Clone, Debug)]
pub struct SimEvent {
    pub deliver_at: u64,
    pub seq: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub payload: Payload,
}

/// Events ordered by `(deliver_at, seq)`.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(u64, u64)>>,
    events: std::collections::HashMap<u64, SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, deliver_at: u64, from: NodeId, to: NodeId, payload: Payload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((deliver_at, seq)));
        self.events.insert(seq, SimEvent { deliver_at, seq, from, to, payload });
    }

    /// Removes and returns the next event due at or before `tick`.
    pub fn pop_due(&mut self, tick: u64) -> Option<SimEvent> {
        match self.heap.peek() {
            Some(Reverse((at, _))) if *at <= tick => {
                let Reverse((_, seq)) = self.heap.pop()?;
                self.events.remove(&seq)
            }
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
