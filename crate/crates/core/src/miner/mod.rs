//! Miner workflow: problem selection, solving, commit-reveal, PoCW trials and block assembly.

pub mod assemble;
pub mod mempool;
pub mod node;
pub mod select;

pub use assemble::assemble_block;
pub use mempool::Mempool;
pub use node::{Miner, MinerConfig, MinerEvent, Phase, StepCounters};
pub use select::{select_problem, Candidate, HighestReward, ProblemChoice, RandomChoice, SelectionKind, SelectionStrategy};
