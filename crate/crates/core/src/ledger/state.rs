//! Account state and the block state-transition function.

use std::sync::Arc;

use im::{OrdMap, OrdSet};
use serde::Serialize;

use super::block::{Block, Genesis, ProblemRef};
use super::codec::Encoder;
use super::config::ChainConfig;
use super::crypto::sha256;
use super::primitives::{Address, Amount, Hash256, Ratio};
use super::tx::{commitment_digest, Transaction, TxBody};
use super::LedgerError;
use crate::crowdwork::{verify_solution, ProblemSpec, RewardTable, SpecError};

/// Deposit held for a proposed problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Lock {
    pub proposer: Address,
    pub amount: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProblemStatus {
    Open,
    Committed { height: u64, committer: Address, commit_tx: Hash256, digest: Hash256 },
    Revealed { level: u32, revealer: Address, reveal_tx: Hash256, reveal_height: u64, reward: Amount },
    Settled { height: u64, solver: Address, level: u32 },
    Expired { height: u64 },
}

impl ProblemStatus {
    fn tag(&self) -> u8 {
        match self {
            ProblemStatus::Open => 0,
            ProblemStatus::Committed { .. } => 1,
            ProblemStatus::Revealed { .. } => 2,
            ProblemStatus::Settled { .. } => 3,
            ProblemStatus::Expired { .. } => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemEntry {
    pub proposer: Address,
    pub proposal_height: u64,
    pub proposal_tx: Hash256,
    pub t_search: u64,
    #[serde(skip)]
    pub spec: Arc<ProblemSpec>,
    #[serde(skip)]
    pub table: Arc<RewardTable>,
    pub status: ProblemStatus,
}

impl ProblemEntry {
    /// First height at which below-top quality levels are accepted.
    pub fn search_closes_at(&self) -> u64 {
        self.proposal_height + self.t_search + 1
    }

    /// Height after which an unsolved proposal is refunded in full.
    pub fn expires_after(&self, cfg: &ChainConfig) -> u64 {
        self.proposal_height + self.t_search + cfg.expire_after(self.t_search)
    }
}

/// Immutable ledger state; cloning is cheap thanks to persistent maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    height: u64,
    tip: Hash256,
    balances: OrdMap<Address, Amount>,
    nonces: OrdMap<Address, u64>,
    locks: OrdMap<Hash256, Lock>,
    problems: OrdMap<Hash256, ProblemEntry>,
    /// Problems neither settled nor expired.
    live: OrdSet<Hash256>,
    /// Revealing transaction hash to problem id, for live reveals.
    reveals: OrdMap<Hash256, Hash256>,
    supply_initial: Amount,
    minted: Amount,
    burned: Amount,
    locked_total: Amount,
}

impl ChainState {
    pub fn genesis(genesis: &Genesis) -> Result<Self, LedgerError> {
        let mut balances = OrdMap::new();
        let mut total = Amount::ZERO;
        for (addr, amount) in &genesis.allocations {
            let cur: Amount = balances.get(addr).copied().unwrap_or_default();
            balances.insert(*addr, cur.checked_add(*amount)?);
            total = total.checked_add(*amount)?;
        }
        Ok(ChainState {
            height: 0,
            tip: genesis.block().hash(),
            balances,
            nonces: OrdMap::new(),
            locks: OrdMap::new(),
            problems: OrdMap::new(),
            live: OrdSet::new(),
            reveals: OrdMap::new(),
            supply_initial: total,
            minted: Amount::ZERO,
            burned: Amount::ZERO,
            locked_total: Amount::ZERO,
        })
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn tip(&self) -> Hash256 {
        self.tip
    }

    pub fn balance(&self, addr: &Address) -> Amount {
        self.balances.get(addr).copied().unwrap_or_default()
    }

    pub fn nonce(&self, addr: &Address) -> u64 {
        self.nonces.get(addr).copied().unwrap_or(0)
    }

    pub fn lock(&self, problem: &Hash256) -> Option<&Lock> {
        self.locks.get(problem)
    }

    pub fn problem(&self, id: &Hash256) -> Option<&ProblemEntry> {
        self.problems.get(id)
    }

    pub fn problems(&self) -> impl Iterator<Item = (&Hash256, &ProblemEntry)> {
        self.problems.iter()
    }

    /// Unsettled, unexpired problems in id order.
    pub fn live_problems(&self) -> impl Iterator<Item = (&Hash256, &ProblemEntry)> {
        self.live.iter().filter_map(move |id| self.problems.get(id).map(|e| (id, e)))
    }

    pub fn balances(&self) -> impl Iterator<Item = (&Address, &Amount)> {
        self.balances.iter()
    }

    pub fn supply_initial(&self) -> Amount {
        self.supply_initial
    }

    pub fn minted(&self) -> Amount {
        self.minted
    }

    pub fn burned(&self) -> Amount {
        self.burned
    }

    pub fn locked_total(&self) -> Amount {
        self.locked_total
    }

    /// Tokens in accounts plus locked deposits: `initial + minted - burned`.
    pub fn total_supply(&self) -> i128 {
        self.supply_initial.0 as i128 + self.minted.0 as i128 - self.burned.0 as i128
    }

    /// `sum(balances) + sum(locks) - (initial + minted - burned)`, recomputed from scratch.
    pub fn conservation_gap(&self) -> i128 {
        let bal: i128 = self.balances.values().map(|a| a.0 as i128).sum();
        let locked: i128 = self.locks.values().map(|l| l.amount.0 as i128).sum();
        bal + locked - self.total_supply()
    }

    /// Digest of the full state, used to compare replicas and replays.
    pub fn digest(&self) -> Hash256 {
        let mut enc = Encoder::with_capacity(256);
        enc.u64(self.height).hash(&self.tip);
        enc.len_prefix(self.balances.len());
        for (a, v) in &self.balances {
            enc.address(a).amount(*v);
        }
        enc.len_prefix(self.nonces.len());
        for (a, n) in &self.nonces {
            enc.address(a).u64(*n);
        }
        enc.len_prefix(self.locks.len());
        for (id, l) in &self.locks {
            enc.hash(id).address(&l.proposer).amount(l.amount);
        }
        enc.len_prefix(self.problems.len());
        for (id, p) in &self.problems {
            enc.hash(id).u8(p.status.tag());
            match &p.status {
                ProblemStatus::Open => {}
                ProblemStatus::Committed { height, committer, commit_tx, digest } => {
                    enc.u64(*height).address(committer).hash(commit_tx).hash(digest);
                }
                ProblemStatus::Revealed { level, revealer, reveal_tx, reveal_height, reward } => {
                    enc.u64(*level as u64).address(revealer).hash(reveal_tx).u64(*reveal_height).amount(*reward);
                }
                ProblemStatus::Settled { height, solver, level } => {
                    enc.u64(*height).address(solver).u64(*level as u64);
                }
                ProblemStatus::Expired { height } => {
                    enc.u64(*height);
                }
            }
        }
        enc.amount(self.supply_initial).amount(self.minted).amount(self.burned);
        sha256(enc.as_slice())
    }

    /// Applies a block then runs expiry for its height. Any error aborts the whole block.
    pub fn apply_block(&self, block: &Block, cfg: &ChainConfig) -> Result<ChainState, LedgerError> {
        self.apply_block_traced(block, cfg).map_err(|(_, e)| e)
    }

    /// As [`ChainState::apply_block`], also naming the failing transaction index, if any.
    pub fn apply_block_traced(
        &self,
        block: &Block,
        cfg: &ChainConfig,
    ) -> Result<ChainState, (Option<usize>, LedgerError)> {
        let mut next = self.clone();
        next.apply_block_mut(block, cfg)?;
        Ok(next)
    }

    /// Expiry pass for `height`; idempotent for a given height.
    pub fn settle_expiry(&self, height: u64, cfg: &ChainConfig) -> ChainState {
        let mut next = self.clone();
        next.settle_expiry_mut(height, cfg);
        next
    }

    /// Checks and applies one transaction as if included in a block at `height` mined by `miner`.
    pub fn apply_tx(
        &mut self,
        tx: &Transaction,
        height: u64,
        miner: &Address,
        cfg: &ChainConfig,
    ) -> Result<(), LedgerError> {
        if cfg.verify_signatures && !tx.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        let expected = self.nonce(&tx.sender);
        if tx.nonce != expected {
            return Err(LedgerError::NonceMismatch { expected, got: tx.nonce });
        }
        match &tx.body {
            TxBody::Transfer { receiver, amount } => {
                if tx.fee > *amount {
                    return Err(LedgerError::FeeExceedsAmount { fee: tx.fee, amount: *amount });
                }
                self.debit(&tx.sender, amount.checked_add(tx.fee)?)?;
                self.credit(receiver, *amount)?;
            }
            TxBody::ProblemProposal { spec, reward_table, t_search } => {
                spec.validate()?;
                reward_table.validate(spec)?;
                if reward_table.min_portion < cfg.min_portion {
                    return Err(SpecError::BadMinPortion.into());
                }
                if *t_search == 0 {
                    return Err(LedgerError::ZeroSearchWindow);
                }
                let deposit = reward_table.top_reward();
                if deposit > cfg.max_reward {
                    return Err(LedgerError::RewardTooLarge(deposit));
                }
                let id = spec.problem_id();
                if self.problems.contains_key(&id) {
                    return Err(LedgerError::DuplicateProblem(id));
                }
                self.debit(&tx.sender, deposit.checked_add(tx.fee)?)?;
                self.locks.insert(id, Lock { proposer: tx.sender, amount: deposit });
                self.locked_total = self.locked_total.checked_add(deposit)?;
                self.problems.insert(
                    id,
                    ProblemEntry {
                        proposer: tx.sender,
                        proposal_height: height,
                        proposal_tx: tx.hash(),
                        t_search: *t_search,
                        spec: spec.clone(),
                        table: reward_table.clone(),
                        status: ProblemStatus::Open,
                    },
                );
                self.live.insert(id);
            }
            TxBody::SolutionCommitment { problem_id, digest } => {
                let entry = self.problems.get(problem_id).ok_or(LedgerError::UnknownProblem(*problem_id))?;
                match entry.status {
                    ProblemStatus::Open => {}
                    ProblemStatus::Committed { .. } => return Err(LedgerError::DuplicateLiveCommitment(*problem_id)),
                    _ => return Err(LedgerError::ProblemClosed(*problem_id)),
                }
                self.debit(&tx.sender, tx.fee)?;
                let status =
                    ProblemStatus::Committed { height, committer: tx.sender, commit_tx: tx.hash(), digest: *digest };
                self.set_status(problem_id, status);
            }
            TxBody::SolutionRevealing { problem_id, commitment_ref, solution, salt } => {
                let entry = self.problems.get(problem_id).ok_or(LedgerError::UnknownProblem(*problem_id))?;
                let ProblemStatus::Committed { height: commit_height, committer, commit_tx, digest } = entry.status
                else {
                    return Err(LedgerError::CommitmentMismatch);
                };
                if commit_tx != *commitment_ref || committer != tx.sender {
                    return Err(LedgerError::CommitmentMismatch);
                }
                let distance = height - commit_height;
                if distance < cfg.t_min || distance > cfg.t_max {
                    return Err(LedgerError::RevealOutOfWindow { distance, t_min: cfg.t_min, t_max: cfg.t_max });
                }
                if commitment_digest(&tx.sender, solution, salt) != digest {
                    return Err(LedgerError::DigestMismatch);
                }
                let verified = verify_solution(&entry.spec, solution, &entry.table)?;
                if verified.level > 1 && height < entry.search_closes_at() {
                    return Err(LedgerError::StaleQualityBeforeTimeout {
                        level: verified.level,
                        open_at: entry.search_closes_at(),
                    });
                }
                let reward = entry.table.reward_at(verified.level).ok_or(LedgerError::Overflow)?;
                self.debit(&tx.sender, tx.fee)?;
                let reveal_tx = tx.hash();
                self.set_status(
                    problem_id,
                    ProblemStatus::Revealed { level: verified.level, revealer: tx.sender, reveal_tx, reveal_height: height, reward },
                );
                self.reveals.insert(reveal_tx, *problem_id);
            }
        }
        self.credit(miner, tx.fee)?;
        self.nonces.insert(tx.sender, expected + 1);
        Ok(())
    }

    fn apply_block_mut(&mut self, block: &Block, cfg: &ChainConfig) -> Result<(), (Option<usize>, LedgerError)> {
        let h = &block.header;
        if h.height != self.height + 1 {
            return Err((None, LedgerError::HeightMismatch { expected: self.height + 1, got: h.height }));
        }
        if h.parent_hash != self.tip {
            return Err((None, LedgerError::ParentMismatch));
        }
        for (i, tx) in block.txs.iter().enumerate() {
            self.apply_tx(tx, h.height, &h.miner, cfg).map_err(|e| (Some(i), e))?;
        }
        self.apply_problem_reward(block, cfg).map_err(|e| (None, e))?;
        self.height = h.height;
        self.tip = block.hash();
        self.settle_expiry_mut(h.height, cfg);
        Ok(())
    }

    fn apply_problem_reward(&mut self, block: &Block, cfg: &ChainConfig) -> Result<(), LedgerError> {
        let h = &block.header;
        match h.problem_ref {
            ProblemRef::System { .. } => {
                if h.problem_reward != cfg.system_reward {
                    return Err(LedgerError::RewardMismatch { expected: cfg.system_reward, got: h.problem_reward });
                }
                let paid = cfg.miner_share(h.problem_reward);
                self.minted = self.minted.checked_add(paid)?;
                self.credit(&h.miner, paid)?;
            }
            ProblemRef::User { revealing_tx } => self.settle_user_block(&revealing_tx, block, cfg)?,
        }
        Ok(())
    }

    fn settle_user_block(&mut self, revealing_tx: &Hash256, block: &Block, cfg: &ChainConfig) -> Result<(), LedgerError> {
        let h = &block.header;
        let id = *self.reveals.get(revealing_tx).ok_or(LedgerError::UnknownReveal(*revealing_tx))?;
        let entry = self.problems.get(&id).ok_or(LedgerError::UnknownProblem(id))?;
        let ProblemStatus::Revealed { level, revealer, reveal_height, reward, .. } = entry.status else {
            return Err(LedgerError::UnknownReveal(*revealing_tx));
        };
        // The reveal must sit on a strict ancestor, never in the block it pays for.
        if reveal_height >= h.height {
            return Err(LedgerError::UnknownReveal(*revealing_tx));
        }
        if revealer != h.miner {
            return Err(LedgerError::RevealerMismatch);
        }
        if reward != h.problem_reward {
            return Err(LedgerError::RewardMismatch { expected: reward, got: h.problem_reward });
        }
        let lock = self.locks.remove(&id).ok_or(LedgerError::LockNotFound(id))?;
        self.locked_total = self.locked_total.checked_sub(lock.amount)?;
        let refund = lock.amount.checked_sub(reward)?;
        let burn = cfg.burn_of(reward);
        self.burned = self.burned.checked_add(burn)?;
        self.credit(&h.miner, reward.checked_sub(burn)?)?;
        self.credit(&lock.proposer, refund)?;
        self.set_status(&id, ProblemStatus::Settled { height: h.height, solver: h.miner, level });
        self.live.remove(&id);
        self.reveals.remove(revealing_tx);
        Ok(())
    }

    fn settle_expiry_mut(&mut self, height: u64, cfg: &ChainConfig) {
        let live: Vec<Hash256> = self.live.iter().copied().collect();
        for id in live {
            let Some(entry) = self.problems.get(&id) else { continue };
            match entry.status {
                // An accepted reveal stays payable until its block lands or a reorg drops it.
                ProblemStatus::Revealed { .. } | ProblemStatus::Settled { .. } | ProblemStatus::Expired { .. } => {}
                ProblemStatus::Open | ProblemStatus::Committed { .. } if height > entry.expires_after(cfg) => {
                    if let Some(lock) = self.locks.remove(&id) {
                        self.locked_total = Amount(self.locked_total.0 - lock.amount.0);
                        let bal = self.balance(&lock.proposer);
                        self.balances.insert(lock.proposer, Amount(bal.0 + lock.amount.0));
                    }
                    self.set_status(&id, ProblemStatus::Expired { height });
                    self.live.remove(&id);
                }
                ProblemStatus::Committed { height: committed, .. } if height > committed + cfg.t_max => {
                    self.set_status(&id, ProblemStatus::Open);
                }
                _ => {}
            }
        }
    }

    fn set_status(&mut self, id: &Hash256, status: ProblemStatus) {
        if let Some(entry) = self.problems.get_mut(id) {
            entry.status = status;
        }
    }

    fn debit(&mut self, addr: &Address, amount: Amount) -> Result<(), LedgerError> {
        if amount.is_zero() {
            return Ok(());
        }
        let available = self.balance(addr);
        let left = available
            .checked_sub(amount)
            .map_err(|_| LedgerError::InsufficientBalance { needed: amount, available })?;
        self.balances.insert(*addr, left);
        Ok(())
    }

    fn credit(&mut self, addr: &Address, amount: Amount) -> Result<(), LedgerError> {
        if amount.is_zero() {
            return Ok(());
        }
        let cur = self.balance(addr);
        self.balances.insert(*addr, cur.checked_add(amount)?);
        Ok(())
    }
}

/// Expected circulating-supply change contributed by one block: `+(1-k)R~` for system blocks
/// and `-kR` for user blocks. Transfers and fees are supply-neutral.
pub fn block_supply_delta(block: &Block, burn_ratio: Ratio) -> i128 {
    let r = block.header.problem_reward;
    let burn = burn_ratio.apply_ceil(r).0 as i128;
    match block.header.problem_ref {
        ProblemRef::System { .. } => r.0 as i128 - burn,
        ProblemRef::User { .. } => -burn,
    }
}
