//! Accounts, transactions, blocks and the deterministic state-transition function.

pub mod block;
pub mod codec;
pub mod config;
pub mod crypto;
pub mod primitives;
pub mod state;
pub mod tx;

use thiserror::Error;

use crate::crowdwork::{SpecError, VerifyError};

pub use block::{Block, BlockHeader, Genesis, ProblemRef};
pub use config::{ChainConfig, ConfigError};
pub use crypto::{sha256, Keypair, PowHash, SignatureBundle};
pub use primitives::{Address, Amount, Difficulty, Hash256, Ratio};
pub use state::{block_supply_delta, ChainState, Lock, ProblemEntry, ProblemStatus};
pub use tx::{commitment_digest, Transaction, TxBody};

/// Reasons a transaction or block cannot be applied to a state.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("insufficient balance: need {needed}, have {available}")]
    InsufficientBalance { needed: Amount, available: Amount },
    #[error("nonce mismatch: expected {expected}, got {got}")]
    NonceMismatch { expected: u64, got: u64 },
    #[error("no deposit lock for problem {0:?}")]
    LockNotFound(Hash256),
    #[error("arithmetic overflow")]
    Overflow,
    #[error("missing or invalid signature")]
    BadSignature,
    #[error("fee {fee} exceeds transferred amount {amount}")]
    FeeExceedsAmount { fee: Amount, amount: Amount },
    #[error("invalid problem: {0}")]
    InvalidProblem(#[from] SpecError),
    #[error("search window must be at least one block")]
    ZeroSearchWindow,
    #[error("deposit {0} exceeds the maximum admissible reward")]
    RewardTooLarge(Amount),
    #[error("problem {0:?} already proposed")]
    DuplicateProblem(Hash256),
    #[error("unknown problem {0:?}")]
    UnknownProblem(Hash256),
    #[error("problem {0:?} already has a live commitment")]
    DuplicateLiveCommitment(Hash256),
    #[error("problem {0:?} is not accepting commitments")]
    ProblemClosed(Hash256),
    #[error("reveal does not match the live commitment")]
    CommitmentMismatch,
    #[error("revealed solution does not hash to the committed digest")]
    DigestMismatch,
    #[error("reveal {distance} blocks after commitment, window is [{t_min}, {t_max}]")]
    RevealOutOfWindow { distance: u64, t_min: u64, t_max: u64 },
    #[error("level {level} solution revealed before the search window closed at height {open_at}")]
    StaleQualityBeforeTimeout { level: u32, open_at: u64 },
    #[error("solution rejected: {0}")]
    BadSolution(#[from] VerifyError),
    #[error("block references revealing transaction {0:?} that is not a live reveal on this chain")]
    UnknownReveal(Hash256),
    #[error("block miner is not the revealer of its problem")]
    RevealerMismatch,
    #[error("block reward {got} does not match the problem reward {expected}")]
    RewardMismatch { expected: Amount, got: Amount },
    #[error("block height {got} does not extend height {expected}")]
    HeightMismatch { expected: u64, got: u64 },
    #[error("block parent does not match the state tip")]
    ParentMismatch,
}

impl LedgerError {
    /// Variant name, for reports and CSV output.
    pub fn kind(&self) -> &'static str {
        match self {
            LedgerError::InsufficientBalance { .. } => "InsufficientBalance",
            LedgerError::NonceMismatch { .. } => "NonceMismatch",
            LedgerError::LockNotFound(_) => "LockNotFound",
            LedgerError::Overflow => "Overflow",
            LedgerError::BadSignature => "BadSignature",
            LedgerError::FeeExceedsAmount { .. } => "FeeExceedsAmount",
            LedgerError::InvalidProblem(_) => "InvalidProblem",
            LedgerError::ZeroSearchWindow => "ZeroSearchWindow",
            LedgerError::RewardTooLarge(_) => "RewardTooLarge",
            LedgerError::DuplicateProblem(_) => "DuplicateProblem",
            LedgerError::UnknownProblem(_) => "UnknownProblem",
            LedgerError::DuplicateLiveCommitment(_) => "DuplicateLiveCommitment",
            LedgerError::ProblemClosed(_) => "ProblemClosed",
            LedgerError::CommitmentMismatch => "CommitmentMismatch",
            LedgerError::DigestMismatch => "DigestMismatch",
            LedgerError::RevealOutOfWindow { .. } => "RevealOutOfWindow",
            LedgerError::StaleQualityBeforeTimeout { .. } => "StaleQualityBeforeTimeout",
            LedgerError::BadSolution(_) => "BadSolution",
            LedgerError::UnknownReveal(_) => "UnknownReveal",
            LedgerError::RevealerMismatch => "RevealerMismatch",
            LedgerError::RewardMismatch { .. } => "RewardMismatch",
            LedgerError::HeightMismatch { .. } => "HeightMismatch",
            LedgerError::ParentMismatch => "ParentMismatch",
        }
    }
}
