//! Full block validation against the state at the block's parent.

use thiserror::Error;

use super::pocw::{pocw_check, system_puzzle_check, PocwResult};
use crate::ledger::{Amount, Block, BlockHeader, ChainConfig, ChainState, Hash256, LedgerError, ProblemRef};

/// Why a block was rejected. Transaction-level protocol rules (reveal window, search
/// timeout, live commitments, balances, nonces) surface through [`Rejection::Ledger`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Rejection {
    #[error("transaction root does not match the transaction list")]
    HashMismatch,
    #[error("parent mismatch")]
    ParentMismatch,
    #[error("height {got} does not follow parent height {parent}")]
    HeightMismatch { parent: u64, got: u64 },
    #[error("timestamp {got} not after parent timestamp {parent}")]
    TimestampNotIncreasing { parent: u64, got: u64 },
    #[error("timestamp {got} is ahead of local time {now}")]
    TimestampInFuture { now: u64, got: u64 },
    #[error("transferred volume {volume} is not below k times reward {reward}")]
    VolumeExceeded { volume: Amount, reward: Amount },
    #[error("PoCW condition fails at the block timestamp")]
    BadPoCW,
    #[error("system puzzle nonce does not meet the target")]
    BadSystemPuzzle,
    #[error("transaction {index}: {error}")]
    Transaction { index: usize, error: LedgerError },
    #[error("{0}")]
    Ledger(LedgerError),
}

impl Rejection {
    /// Name of the failed rule; transaction failures report the underlying ledger rule.
    pub fn kind(&self) -> &'static str {
        match self {
            Rejection::HashMismatch => "HashMismatch",
            Rejection::ParentMismatch => "ParentMismatch",
            Rejection::HeightMismatch { .. } => "HeightMismatch",
            Rejection::TimestampNotIncreasing { .. } => "TimestampNotIncreasing",
            Rejection::TimestampInFuture { .. } => "TimestampInFuture",
            Rejection::VolumeExceeded { .. } => "VolumeExceeded",
            Rejection::BadPoCW => "BadPoCW",
            Rejection::BadSystemPuzzle => "BadSystemPuzzle",
            Rejection::Transaction { error, .. } | Rejection::Ledger(error) => error.kind(),
        }
    }
}

/// Everything a block is validated against.
#[derive(Clone, Copy, Debug)]
pub struct ValidationContext<'a> {
    /// State after applying genesis through the parent.
    pub parent_state: &'a ChainState,
    pub parent_header: &'a BlockHeader,
    pub config: &'a ChainConfig,
    /// Local clock; blocks stamped later are rejected. `None` skips the check (replay).
    pub now: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub block_hash: Hash256,
    /// The post-block state on acceptance.
    pub verdict: Result<ChainState, Rejection>,
    /// The PoCW threshold saturated at 2^256 (accepted, but worth flagging).
    pub saturated_threshold: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict.is_ok()
    }
}

/// Validates `block` on top of `ctx`. Pure: equal inputs give equal reports.
pub fn validate_block(block: &Block, ctx: &ValidationContext<'_>) -> ValidationReport {
    let mut saturated = false;
    let verdict = check(block, ctx, &mut saturated);
    ValidationReport { block_hash: block.hash(), verdict, saturated_threshold: saturated }
}

fn check(block: &Block, ctx: &ValidationContext<'_>, saturated: &mut bool) -> Result<ChainState, Rejection> {
    let h = &block.header;
    let cfg = ctx.config;
    if !block.tx_root_matches() {
        return Err(Rejection::HashMismatch);
    }
    if h.parent_hash != ctx.parent_state.tip() {
        return Err(Rejection::ParentMismatch);
    }
    if h.height != ctx.parent_header.height + 1 {
        return Err(Rejection::HeightMismatch { parent: ctx.parent_header.height, got: h.height });
    }
    if h.timestamp <= ctx.parent_header.timestamp {
        return Err(Rejection::TimestampNotIncreasing { parent: ctx.parent_header.timestamp, got: h.timestamp });
    }
    if let Some(now) = ctx.now {
        if h.timestamp > now {
            return Err(Rejection::TimestampInFuture { now, got: h.timestamp });
        }
    }
    let volume = block.volume().map_err(Rejection::Ledger)?;
    if !cfg.volume_allowed(volume, h.problem_reward) {
        return Err(Rejection::VolumeExceeded { volume, reward: h.problem_reward });
    }
    match h.problem_ref {
        ProblemRef::System { nonce } => {
            if !system_puzzle_check(h, nonce, cfg.system_difficulty, cfg.pow_hash) {
                return Err(Rejection::BadSystemPuzzle);
            }
        }
        ProblemRef::User { .. } => match pocw_check(h, h.timestamp, cfg.pocw_difficulty, h.problem_reward, cfg.pow_hash) {
            PocwResult::Fail => return Err(Rejection::BadPoCW),
            PocwResult::PassSaturated => *saturated = true,
            PocwResult::Pass => {}
        },
    }
    apply_checked(ctx.parent_state, block, cfg)
}

fn apply_checked(parent: &ChainState, block: &Block, cfg: &ChainConfig) -> Result<ChainState, Rejection> {
    parent.apply_block_traced(block, cfg).map_err(|(index, error)| match index {
        Some(index) => Rejection::Transaction { index, error },
        None => Rejection::Ledger(error),
    })
}
