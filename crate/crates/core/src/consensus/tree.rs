//! Block tree with the maximum-aggregated-value fork choice.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::ledger::{Block, Hash256};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("parent {0:?} is not in the tree")]
    UnknownParent(Hash256),
    #[error("block {0:?} is already in the tree")]
    Duplicate(Hash256),
    #[error("block height does not follow its parent")]
    BadHeight,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub block: Arc<Block>,
    pub children: Vec<Hash256>,
    /// Sum of problem rewards from genesis through this block.
    pub aggregated_value: u128,
    /// Arrival order; lower is earlier.
    pub seq: u64,
}

/// All known valid blocks. Lookups go through a hash map; nothing iterates it in an
/// order-sensitive way, so results are deterministic.
#[derive(Clone, Debug)]
pub struct BlockTree {
    nodes: HashMap<Hash256, TreeNode>,
    genesis: Hash256,
    best: Hash256,
    next_seq: u64,
}

impl BlockTree {
    pub fn new(genesis: Arc<Block>) -> Self {
        let hash = genesis.hash();
        let value = genesis.reward().0 as u128;
        let mut nodes = HashMap::new();
        nodes.insert(hash, TreeNode { block: genesis, children: Vec::new(), aggregated_value: value, seq: 0 });
        BlockTree { nodes, genesis: hash, best: hash, next_seq: 1 }
    }

    pub fn genesis(&self) -> Hash256 {
        self.genesis
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.nodes.contains_key(hash)
    }

    pub fn get(&self, hash: &Hash256) -> Option<&TreeNode> {
        self.nodes.get(hash)
    }

    pub fn block(&self, hash: &Hash256) -> Option<&Arc<Block>> {
        self.nodes.get(hash).map(|n| &n.block)
    }

    /// Sequence number the next inserted block will get.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Blocks inserted at or after `seq`, in arrival order.
    pub fn arrived_since(&self, seq: u64) -> Vec<&TreeNode> {
        let mut v: Vec<&TreeNode> = self.nodes.values().filter(|n| n.seq >= seq).collect();
        v.sort_by_key(|n| n.seq);
        v
    }

    pub fn aggregated_value(&self, hash: &Hash256) -> Option<u128> {
        self.nodes.get(hash).map(|n| n.aggregated_value)
    }

    /// Inserts a block whose parent is present. Returns the new fork-choice tip.
    pub fn insert(&mut self, block: Arc<Block>) -> Result<Hash256, TreeError> {
        let hash = block.hash();
        if self.nodes.contains_key(&hash) {
            return Err(TreeError::Duplicate(hash));
        }
        let parent_hash = block.parent();
        let parent = self.nodes.get_mut(&parent_hash).ok_or(TreeError::UnknownParent(parent_hash))?;
        if block.height() != parent.block.height() + 1 {
            return Err(TreeError::BadHeight);
        }
        parent.children.push(hash);
        let value = parent.aggregated_value + block.reward().0 as u128;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.nodes.insert(hash, TreeNode { block, children: Vec::new(), aggregated_value: value, seq });

        let best_value = self.nodes[&self.best].aggregated_value;
        if value > best_value {
            self.best = hash;
        } else if parent_hash == self.best {
            // The old tip stopped being a leaf while the new leaf only ties it.
            self.best = self.scan_best();
        }
        Ok(self.best)
    }

    /// Fork-choice tip: the leaf of maximum aggregated value, earliest arrival on ties.
    pub fn mav_select(&self) -> Hash256 {
        self.best
    }

    /// Full scan over leaves; reference for the incremental rule.
    pub fn scan_best(&self) -> Hash256 {
        let mut best: Option<&TreeNode> = None;
        for node in self.nodes.values().filter(|n| n.children.is_empty()) {
            best = match best {
                Some(b) if (b.aggregated_value, std::cmp::Reverse(b.seq)) >= (node.aggregated_value, std::cmp::Reverse(node.seq)) => Some(b),
                _ => Some(node),
            };
        }
        best.map(|n| n.block.hash()).unwrap_or(self.genesis)
    }

    /// Hashes from genesis to `tip`, inclusive.
    pub fn path_to(&self, tip: &Hash256) -> Vec<Hash256> {
        let mut out = Vec::new();
        let mut cur = *tip;
        while let Some(node) = self.nodes.get(&cur) {
            out.push(cur);
            if cur == self.genesis {
                break;
            }
            cur = node.block.parent();
        }
        out.reverse();
        out
    }

    /// Ancestor of `hash` at `height`, if `hash` is at or above it.
    pub fn ancestor_at(&self, hash: &Hash256, height: u64) -> Option<Hash256> {
        let mut cur = *hash;
        loop {
            let node = self.nodes.get(&cur)?;
            let h = node.block.height();
            if h == height {
                return Some(cur);
            }
            if h < height || cur == self.genesis {
                return None;
            }
            cur = node.block.parent();
        }
    }

    pub fn is_ancestor(&self, ancestor: &Hash256, of: &Hash256) -> bool {
        match self.nodes.get(ancestor) {
            Some(a) => self.ancestor_at(of, a.block.height()) == Some(*ancestor),
            None => false,
        }
    }

    /// Latest block shared by the chains ending at `a` and `b`.
    pub fn common_ancestor(&self, a: &Hash256, b: &Hash256) -> Option<Hash256> {
        let (mut x, mut y) = (*a, *b);
        loop {
            if x == y {
                return Some(x);
            }
            let hx = self.nodes.get(&x)?.block.height();
            let hy = self.nodes.get(&y)?.block.height();
            if hx >= hy {
                x = self.nodes[&x].block.parent();
            }
            if hy >= hx {
                y = self.nodes[&y].block.parent();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Address, Amount, BlockHeader, Genesis, ProblemRef};

    pub(crate) fn child(parent: &Block, reward: u64, salt: u64) -> Arc<Block> {
        Arc::new(Block::new(
            BlockHeader {
                parent_hash: parent.hash(),
                height: parent.height() + 1,
                timestamp: parent.header.timestamp + 1,
                miner: Address::default(),
                problem_ref: ProblemRef::System { nonce: salt },
                problem_reward: Amount(reward),
                tx_root: Hash256::ZERO,
            },
            Vec::new(),
        ))
    }

    #[test]
    fn larger_aggregate_wins_over_longer_fork() {
        let g = Arc::new(Genesis::new(vec![]).block());
        let mut t = BlockTree::new(g.clone());
        let a1 = child(&g, 10, 1);
        let a2 = child(&a1, 15, 2);
        let b1 = child(&g, 30, 3);
        t.insert(a1).unwrap();
        t.insert(a2).unwrap();
        t.insert(b1.clone()).unwrap();
        assert_eq!(t.mav_select(), b1.hash());
        assert_eq!(t.scan_best(), b1.hash());
    }

    #[test]
    fn tie_keeps_first_seen() {
        let g = Arc::new(Genesis::new(vec![]).block());
        let mut t = BlockTree::new(g.clone());
        let a = child(&g, 10, 1);
        let b = child(&g, 10, 2);
        t.insert(a.clone()).unwrap();
        t.insert(b).unwrap();
        assert_eq!(t.mav_select(), a.hash());
    }

    #[test]
    fn zero_reward_extension_of_tip() {
        let g = Arc::new(Genesis::new(vec![]).block());
        let mut t = BlockTree::new(g.clone());
        let a = child(&g, 10, 1);
        let b = child(&g, 10, 2);
        let b0 = child(&b, 0, 3);
        let a0 = child(&a, 0, 4);
        for blk in [a.clone(), b, b0.clone(), a0] {
            t.insert(blk).unwrap();
            assert_eq!(t.mav_select(), t.scan_best());
        }
        assert_eq!(t.mav_select(), b0.hash());
    }

    #[test]
    fn ancestry_queries() {
        let g = Arc::new(Genesis::new(vec![]).block());
        let mut t = BlockTree::new(g.clone());
        let a1 = child(&g, 1, 1);
        let a2 = child(&a1, 1, 2);
        let b2 = child(&a1, 1, 3);
        for blk in [a1.clone(), a2.clone(), b2.clone()] {
            t.insert(blk).unwrap();
        }
        assert_eq!(t.common_ancestor(&a2.hash(), &b2.hash()), Some(a1.hash()));
        assert!(t.is_ancestor(&a1.hash(), &b2.hash()));
        assert!(!t.is_ancestor(&a2.hash(), &b2.hash()));
        assert_eq!(t.path_to(&a2.hash()), vec![g.hash(), a1.hash(), a2.hash()]);
        assert!(matches!(t.insert(a2), Err(TreeError::Duplicate(_))));
    }
}
