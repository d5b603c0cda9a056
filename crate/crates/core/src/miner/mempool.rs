//! Pending transactions and volume-bounded block assembly.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ledger::{Address, Amount, ChainConfig, ChainState, Hash256, Transaction};

/// Pending transactions keyed by (sender, nonce); a later arrival replaces an earlier one.
#[derive(Clone, Debug, Default)]
pub struct Mempool {
    txs: BTreeMap<(Address, u64), Arc<Transaction>>,
    capacity: usize,
    version: u64,
}

impl Mempool {
    pub fn new(capacity: usize) -> Self {
        Mempool { txs: BTreeMap::new(), capacity, version: 0 }
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Bumped on every change; lets callers cache assembled candidates.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.txs.values().any(|t| t.hash() == *hash)
    }

    pub fn get(&self, sender: &Address, nonce: u64) -> Option<&Arc<Transaction>> {
        self.txs.get(&(*sender, nonce))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Transaction>> {
        self.txs.values()
    }

    /// Adds a transaction unless its nonce is already used on `state` or the pool is full.
    pub fn add(&mut self, tx: Arc<Transaction>, state: &ChainState) -> bool {
        if tx.nonce < state.nonce(&tx.sender) {
            return false;
        }
        let key = (tx.sender, tx.nonce);
        if let Some(existing) = self.txs.get(&key) {
            if existing.hash() == tx.hash() {
                return false;
            }
        } else if self.txs.len() >= self.capacity {
            return false;
        }
        self.txs.insert(key, tx);
        self.version += 1;
        true
    }

    /// Drops transactions whose nonces the state has consumed.
    pub fn reconcile(&mut self, state: &ChainState) {
        let before = self.txs.len();
        self.txs.retain(|(sender, nonce), _| *nonce >= state.nonce(sender));
        if self.txs.len() != before {
            self.version += 1;
        }
    }

    /// Greedy block fill: heads of each sender's nonce sequence, best fee density first,
    /// keeping the transferred volume strictly below `k * reward`. Transactions that fail
    /// against the running state are skipped along with that sender's later nonces.
    pub fn select(
        &self,
        state: &ChainState,
        reward: Amount,
        height: u64,
        miner: &Address,
        cfg: &ChainConfig,
        max_txs: usize,
    ) -> Vec<Arc<Transaction>> {
        let mut scratch = state.clone();
        let mut heads: Vec<Arc<Transaction>> = Vec::new();
        let mut last_sender: Option<Address> = None;
        for ((sender, nonce), tx) in &self.txs {
            if last_sender != Some(*sender) && *nonce == state.nonce(sender) {
                heads.push(tx.clone());
            }
            last_sender = Some(*sender);
        }
        let mut out = Vec::new();
        let mut volume = Amount::ZERO;
        while out.len() < max_txs {
            let Some(best) = heads.iter().enumerate().min_by(|a, b| priority(a.1, b.1)).map(|(i, _)| i) else {
                break;
            };
            let tx = heads.swap_remove(best);
            let Ok(next_volume) = volume.checked_add(tx.volume()) else { continue };
            if !cfg.volume_allowed(next_volume, reward) {
                continue;
            }
            let mut probe = scratch.clone();
            if probe.apply_tx(&tx, height, miner, cfg).is_err() {
                continue;
            }
            scratch = probe;
            volume = next_volume;
            if let Some(next) = self.txs.get(&(tx.sender, tx.nonce + 1)) {
                heads.push(next.clone());
            }
            out.push(tx);
        }
        out
    }
}

/// Ordering for inclusion: zero-volume transactions first, then fee per unit volume
/// descending, then fee descending, then hash for determinism.
pub fn priority(a: &Transaction, b: &Transaction) -> Ordering {
    let (fa, va) = (a.fee.0 as u128, a.volume().0 as u128);
    let (fb, vb) = (b.fee.0 as u128, b.volume().0 as u128);
    let density = match (va == 0, vb == 0) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => Ordering::Equal,
        (false, false) => (fb * va).cmp(&(fa * vb)),
    };
    density.then(fb.cmp(&fa)).then(a.hash().cmp(&b.hash()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Genesis, Keypair, Ratio};

    fn setup(n: usize) -> (Vec<Address>, ChainState, ChainConfig) {
        let addrs: Vec<Address> = (0..n).map(|i| Keypair::derive(&format!("u{i}")).address()).collect();
        let genesis = Genesis::new(addrs.iter().map(|a| (*a, Amount(1_000))).collect());
        let cfg = ChainConfig { verify_signatures: false, burn_ratio: Ratio::from_f64(0.05), ..Default::default() };
        (addrs, ChainState::genesis(&genesis).unwrap(), cfg)
    }

    #[test]
    fn greedy_under_strict_bound() {
        let (a, state, cfg) = setup(4);
        let mut pool = Mempool::new(100);
        for (i, (amount, fee)) in [(3, 3), (2, 1), (1, 1)].into_iter().enumerate() {
            pool.add(Arc::new(Transaction::transfer(a[i], a[3], Amount(amount), Amount(fee), 0)), &state);
        }
        let picked = pool.select(&state, Amount(100), 1, &a[3], &cfg, 100);
        let mut amounts: Vec<u64> = picked.iter().map(|t| t.volume().0).collect();
        amounts.sort_unstable();
        assert_eq!(amounts, vec![1, 3]);
    }

    #[test]
    fn respects_nonce_order_and_replacement() {
        let (a, state, cfg) = setup(2);
        let mut pool = Mempool::new(100);
        assert!(pool.add(Arc::new(Transaction::transfer(a[0], a[1], Amount(1), Amount(1), 1)), &state));
        assert!(pool.select(&state, Amount(1000), 1, &a[1], &cfg, 10).is_empty());
        assert!(pool.add(Arc::new(Transaction::transfer(a[0], a[1], Amount(2), Amount(0), 0)), &state));
        assert!(pool.add(Arc::new(Transaction::transfer(a[0], a[1], Amount(1), Amount(0), 0)), &state));
        assert_eq!(pool.len(), 2);
        let picked = pool.select(&state, Amount(1000), 1, &a[1], &cfg, 10);
        assert_eq!(picked.iter().map(|t| t.nonce).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn empty_pool_gives_empty_block() {
        let (a, state, cfg) = setup(1);
        assert!(Mempool::new(10).select(&state, Amount(100), 1, &a[0], &cfg, 10).is_empty());
    }
}
