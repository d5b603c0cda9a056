use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::codec::{CanonicalEncode, Encoder};
use super::crypto::sha256;
use super::primitives::{Address, Amount, Hash256};
use super::tx::Transaction;

/// The single problem a block is mined on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemRef {
    /// User problem, named by the revealing transaction that disclosed the solution.
    User { revealing_tx: Hash256 },
    /// System hash puzzle solved with this nonce.
    System { nonce: u64 },
}

impl ProblemRef {
    pub fn is_system(&self) -> bool {
        matches!(self, ProblemRef::System { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub parent_hash: Hash256,
    pub height: u64,
    pub timestamp: u64,
    pub miner: Address,
    pub problem_ref: ProblemRef,
    pub problem_reward: Amount,
    pub tx_root: Hash256,
}

impl BlockHeader {
    /// Fields after the timestamp, in declared order. `with_nonce` false omits the system nonce.
    fn encode_tail(&self, enc: &mut Encoder, with_nonce: bool) {
        enc.address(&self.miner);
        match self.problem_ref {
            ProblemRef::User { revealing_tx } => {
                enc.u8(0).hash(&revealing_tx);
            }
            ProblemRef::System { nonce } => {
                enc.u8(1);
                if with_nonce {
                    enc.u64(nonce);
                }
            }
        }
        enc.amount(self.problem_reward).hash(&self.tx_root);
    }

    /// Header encoding with the timestamp removed: the PoCW preimage suffix.
    pub fn bytes_without_timestamp(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(160);
        enc.hash(&self.parent_hash).u64(self.height);
        self.encode_tail(&mut enc, true);
        enc.finish()
    }

    /// Header encoding with the system nonce removed: the puzzle preimage prefix.
    pub fn bytes_without_nonce(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(160);
        enc.hash(&self.parent_hash).u64(self.height).u64(self.timestamp);
        self.encode_tail(&mut enc, false);
        enc.finish()
    }

    pub fn hash(&self) -> Hash256 {
        sha256(&self.canonical_bytes())
    }
}

impl CanonicalEncode for BlockHeader {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.hash(&self.parent_hash).u64(self.height).u64(self.timestamp);
        self.encode_tail(enc, true);
    }
}

/// Digest over the ordered transaction hashes.
pub fn tx_root(txs: &[Arc<Transaction>]) -> Hash256 {
    let mut enc = Encoder::with_capacity(8 + 32 * txs.len());
    enc.len_prefix(txs.len());
    for tx in txs {
        enc.hash(&tx.hash());
    }
    sha256(enc.as_slice())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<Arc<Transaction>>,
    #[serde(skip)]
    hash: OnceLock<Hash256>,
}

impl PartialEq for Block {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.txs == other.txs
    }
}

impl Eq for Block {}

impl Block {
    /// Builds a block, filling in `tx_root` from `txs`.
    pub fn new(mut header: BlockHeader, txs: Vec<Arc<Transaction>>) -> Self {
        header.tx_root = tx_root(&txs);
        Block { header, txs, hash: OnceLock::new() }
    }

    /// Assembles a block without recomputing `tx_root`, e.g. from an untrusted dump.
    pub fn from_parts(header: BlockHeader, txs: Vec<Arc<Transaction>>) -> Self {
        Block { header, txs, hash: OnceLock::new() }
    }

    pub fn hash(&self) -> Hash256 {
        *self.hash.get_or_init(|| self.header.hash())
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn parent(&self) -> Hash256 {
        self.header.parent_hash
    }

    pub fn reward(&self) -> Amount {
        self.header.problem_reward
    }

    pub fn tx_root_matches(&self) -> bool {
        tx_root(&self.txs) == self.header.tx_root
    }

    pub fn volume(&self) -> Result<Amount, super::LedgerError> {
        self.txs.iter().try_fold(Amount::ZERO, |acc, tx| acc.checked_add(tx.volume()))
    }
}

/// Initial allocations; the genesis block commits to them through its `tx_root`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genesis {
    pub allocations: Vec<(Address, Amount)>,
}

impl Genesis {
    pub fn new(allocations: Vec<(Address, Amount)>) -> Self {
        Genesis { allocations }
    }

    pub fn allocation_root(&self) -> Hash256 {
        let mut enc = Encoder::new();
        enc.len_prefix(self.allocations.len());
        for (a, v) in &self.allocations {
            enc.address(a).amount(*v);
        }
        sha256(enc.as_slice())
    }

    pub fn block(&self) -> Block {
        let header = BlockHeader {
            parent_hash: Hash256::ZERO,
            height: 0,
            timestamp: 0,
            miner: Address::default(),
            problem_ref: ProblemRef::System { nonce: 0 },
            problem_reward: Amount::ZERO,
            tx_root: self.allocation_root(),
        };
        Block::from_parts(header, Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn header() -> BlockHeader {
        BlockHeader {
            parent_hash: Hash256([3; 32]),
            height: 7,
            timestamp: 99,
            miner: Address(Hash256([5; 32])),
            problem_ref: ProblemRef::System { nonce: 42 },
            problem_reward: Amount(100),
            tx_root: Hash256([9; 32]),
        }
    }

    #[test]
    fn block_hash_is_digest_of_canonical_header() {
        let h = header();
        let bytes = h.canonical_bytes();
        // 32 parent + 8 height + 8 time + 32 miner + 1 tag + 8 nonce + 8 reward + 32 root
        assert_eq!(bytes.len(), 129);
        let reference: [u8; 32] = Sha256::digest(&bytes).into();
        assert_eq!(h.hash().0, reference);
    }

    #[test]
    fn partial_encodings_drop_exactly_one_field() {
        let h = header();
        let full = h.canonical_bytes();
        assert_eq!(h.bytes_without_timestamp().len(), full.len() - 8);
        assert_eq!(h.bytes_without_nonce().len(), full.len() - 8);
        let mut later = h.clone();
        later.timestamp += 1;
        assert_eq!(later.bytes_without_timestamp(), h.bytes_without_timestamp());
        let mut other_nonce = h.clone();
        other_nonce.problem_ref = ProblemRef::System { nonce: 1 };
        assert_eq!(other_nonce.bytes_without_nonce(), h.bytes_without_nonce());
    }

    #[test]
    fn genesis_commits_to_allocations() {
        let a = Genesis::new(vec![(Address(Hash256([1; 32])), Amount(10))]);
        let b = Genesis::new(vec![(Address(Hash256([1; 32])), Amount(11))]);
        assert_ne!(a.block().hash(), b.block().hash());
    }
}
