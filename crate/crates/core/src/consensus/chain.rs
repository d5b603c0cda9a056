//! A node's view of the chain: block tree, fork choice, and state at any known block.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use super::tree::BlockTree;
use super::validate::{validate_block, Rejection, ValidationContext};
use crate::ledger::{Block, ChainConfig, ChainState, Genesis, Hash256, LedgerError};

/// States are stored for blocks at heights divisible by this; others are replayed.
pub const SNAPSHOT_INTERVAL: u64 = 16;
const RECENT_STATES: usize = 64;
const MAX_ORPHANS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InsertError {
    #[error("parent {0:?} unknown")]
    UnknownParent(Hash256),
    #[error("block rejected: {0}")]
    Invalid(Rejection),
}

/// Effect of a delivery on the main chain.
#[derive(Clone, Debug, Default)]
pub struct ChainUpdate {
    /// Blocks that left the main chain, lowest first.
    pub orphaned: Vec<Arc<Block>>,
    /// Blocks that joined the main chain, lowest first.
    pub adopted: Vec<Arc<Block>>,
    pub rejected: Vec<(Hash256, Rejection)>,
    /// Blocks buffered because their parent is still missing.
    pub buffered: usize,
}

impl ChainUpdate {
    pub fn tip_changed(&self) -> bool {
        !self.adopted.is_empty() || !self.orphaned.is_empty()
    }

    pub fn is_reorg(&self) -> bool {
        !self.orphaned.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ChainView {
    config: Arc<ChainConfig>,
    tree: BlockTree,
    snapshots: HashMap<Hash256, ChainState>,
    recent: VecDeque<(Hash256, ChainState)>,
    tip_state: ChainState,
    /// Main-chain hashes indexed by height.
    main: Vec<Hash256>,
    orphans: BTreeMap<Hash256, Vec<Arc<Block>>>,
    orphan_count: usize,
}

impl ChainView {
    pub fn new(config: Arc<ChainConfig>, genesis: &Genesis) -> Result<Self, LedgerError> {
        let block = Arc::new(genesis.block());
        let hash = block.hash();
        let state = ChainState::genesis(genesis)?;
        let mut snapshots = HashMap::new();
        snapshots.insert(hash, state.clone());
        Ok(ChainView {
            config,
            tree: BlockTree::new(block),
            snapshots,
            recent: VecDeque::new(),
            tip_state: state,
            main: vec![hash],
            orphans: BTreeMap::new(),
            orphan_count: 0,
        })
    }

    pub fn config(&self) -> &Arc<ChainConfig> {
        &self.config
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn tip(&self) -> Hash256 {
        *self.main.last().expect("main chain holds genesis")
    }

    pub fn tip_block(&self) -> &Arc<Block> {
        self.tree.block(&self.tip()).expect("tip is in the tree")
    }

    pub fn height(&self) -> u64 {
        self.main.len() as u64 - 1
    }

    pub fn tip_state(&self) -> &ChainState {
        &self.tip_state
    }

    pub fn main_chain(&self) -> &[Hash256] {
        &self.main
    }

    pub fn main_block_at(&self, height: u64) -> Option<&Arc<Block>> {
        self.main.get(height as usize).and_then(|h| self.tree.block(h))
    }

    pub fn is_on_main(&self, hash: &Hash256) -> bool {
        match self.tree.get(hash) {
            Some(n) => self.main.get(n.block.height() as usize) == Some(hash),
            None => false,
        }
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.tree.contains(hash)
    }

    /// State after applying genesis through `hash`.
    pub fn state_at(&self, hash: &Hash256) -> Option<ChainState> {
        if *hash == self.tip() {
            return Some(self.tip_state.clone());
        }
        if let Some(s) = self.snapshots.get(hash) {
            return Some(s.clone());
        }
        if let Some((_, s)) = self.recent.iter().find(|(h, _)| h == hash) {
            return Some(s.clone());
        }
        let mut pending = Vec::new();
        let mut cur = *hash;
        let mut state = loop {
            if let Some(s) = self.snapshots.get(&cur) {
                break s.clone();
            }
            if let Some((_, s)) = self.recent.iter().find(|(h, _)| *h == cur) {
                break s.clone();
            }
            let block = self.tree.block(&cur)?;
            pending.push(block.clone());
            cur = block.parent();
        };
        for block in pending.iter().rev() {
            state = state.apply_block(block, &self.config).expect("stored blocks were validated");
        }
        Some(state)
    }

    /// Validates and inserts a block, then any buffered descendants. Blocks with an unknown
    /// parent are buffered until it arrives.
    pub fn receive(&mut self, block: Arc<Block>, now: Option<u64>) -> ChainUpdate {
        let old_tip = self.tip();
        let mut update = ChainUpdate::default();
        let mut queue = vec![block];
        while let Some(b) = queue.pop() {
            let hash = b.hash();
            match self.insert_one(b.clone(), now) {
                Ok(true) => {
                    if let Some(children) = self.orphans.remove(&hash) {
                        self.orphan_count -= children.len();
                        queue.extend(children);
                    }
                }
                Ok(false) => {}
                Err(InsertError::UnknownParent(parent)) => {
                    if self.orphan_count < MAX_ORPHANS {
                        let slot = self.orphans.entry(parent).or_default();
                        if !slot.iter().any(|o| o.hash() == hash) {
                            slot.push(b);
                            self.orphan_count += 1;
                            update.buffered += 1;
                        }
                    }
                }
                Err(InsertError::Invalid(r)) => update.rejected.push((hash, r)),
            }
        }
        self.finish_update(old_tip, &mut update);
        update
    }

    /// Inserts one block whose parent must be known. `Ok(false)` means already known.
    pub fn insert_one(&mut self, block: Arc<Block>, now: Option<u64>) -> Result<bool, InsertError> {
        let hash = block.hash();
        if self.tree.contains(&hash) {
            return Ok(false);
        }
        let parent = block.parent();
        let parent_state = self.state_at(&parent).ok_or(InsertError::UnknownParent(parent))?;
        let parent_header = self.tree.block(&parent).expect("parent present").header.clone();
        let ctx = ValidationContext { parent_state: &parent_state, parent_header: &parent_header, config: &self.config, now };
        let report = validate_block(&block, &ctx);
        let state = report.verdict.map_err(InsertError::Invalid)?;
        let height = block.height();
        let old_tip = self.tip();
        let new_tip = self.tree.insert(block).expect("validated block links to a known parent");
        if height % SNAPSHOT_INTERVAL == 0 {
            self.snapshots.insert(hash, state.clone());
        }
        if self.recent.len() == RECENT_STATES {
            self.recent.pop_front();
        }
        self.recent.push_back((hash, state.clone()));
        if new_tip != old_tip {
            if new_tip == hash && parent == old_tip {
                self.main.push(hash);
                self.tip_state = state;
            } else {
                self.main = self.tree.path_to(&new_tip);
                self.tip_state = if new_tip == hash { state } else { self.state_at(&new_tip).expect("tip known") };
            }
        }
        Ok(true)
    }

    fn finish_update(&self, old_tip: Hash256, update: &mut ChainUpdate) {
        let new_tip = self.tip();
        if new_tip == old_tip {
            return;
        }
        let ca = self.tree.common_ancestor(&old_tip, &new_tip).expect("both tips descend from genesis");
        let ca_height = self.tree.block(&ca).expect("known").height();
        let mut cur = old_tip;
        while cur != ca {
            let b = self.tree.block(&cur).expect("known").clone();
            cur = b.parent();
            update.orphaned.push(b);
        }
        update.orphaned.reverse();
        update.adopted =
            self.main[ca_height as usize + 1..].iter().map(|h| self.tree.block(h).expect("known").clone()).collect();
    }

    /// Main-chain blocks from genesis (exclusive) to the tip.
    pub fn main_blocks(&self) -> impl DoubleEndedIterator<Item = &Arc<Block>> + '_ {
        self.main.iter().skip(1).map(|h| self.tree.block(h).expect("main blocks are in the tree"))
    }
}
