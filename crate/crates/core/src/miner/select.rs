//! Problem selection policies.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{Amount, ChainState, Hash256, ProblemStatus};

/// What a miner works on next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemChoice {
    User(Hash256),
    System,
}

/// An open user problem a miner could pick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub id: Hash256,
    pub top_reward: Amount,
}

pub trait SelectionStrategy: Send {
    /// Picks among `candidates` (sorted by id); `None` falls back to the system problem.
    fn choose(&mut self, candidates: &[Candidate], rng: &mut ChaCha8Rng) -> Option<Hash256>;
}

/// Highest level-1 reward; ties go to the lowest problem id.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighestReward;

impl SelectionStrategy for HighestReward {
    fn choose(&mut self, candidates: &[Candidate], _rng: &mut ChaCha8Rng) -> Option<Hash256> {
        candidates
            .iter()
            .max_by(|a, b| a.top_reward.cmp(&b.top_reward).then(b.id.cmp(&a.id)))
            .map(|c| c.id)
    }
}

/// Uniformly random open problem, independently per miner.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomChoice;

impl SelectionStrategy for RandomChoice {
    fn choose(&mut self, candidates: &[Candidate], rng: &mut ChaCha8Rng) -> Option<Hash256> {
        if candidates.is_empty() {
            None
        } else {
            Some(candidates[rng.random_range(0..candidates.len())].id)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    #[default]
    HighestReward,
    Random,
}

impl SelectionKind {
    pub fn build(self) -> Box<dyn SelectionStrategy> {
        match self {
            SelectionKind::HighestReward => Box::new(HighestReward),
            SelectionKind::Random => Box::new(RandomChoice),
        }
    }
}

/// Open problems with no live commitment, minus those in `skip`, sorted by id.
pub fn open_candidates(state: &ChainState, skip: &BTreeSet<Hash256>) -> Vec<Candidate> {
    state
        .live_problems()
        .filter(|(id, e)| matches!(e.status, ProblemStatus::Open) && !skip.contains(*id))
        .map(|(id, e)| Candidate { id: *id, top_reward: e.table.top_reward() })
        .collect()
}

pub fn select_problem(
    state: &ChainState,
    skip: &BTreeSet<Hash256>,
    strategy: &mut dyn SelectionStrategy,
    rng: &mut ChaCha8Rng,
) -> ProblemChoice {
    match strategy.choose(&open_candidates(state, skip), rng) {
        Some(id) => ProblemChoice::User(id),
        None => ProblemChoice::System,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cand(id: u8, reward: u64) -> Candidate {
        Candidate { id: Hash256([id; 32]), top_reward: Amount(reward) }
    }

    #[test]
    fn highest_reward_prefers_larger_deposit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = HighestReward.choose(&[cand(1, 50), cand(2, 80)], &mut rng);
        assert_eq!(pick, Some(Hash256([2; 32])));
        let tie = HighestReward.choose(&[cand(3, 80), cand(2, 80)], &mut rng);
        assert_eq!(tie, Some(Hash256([2; 32])));
        assert_eq!(HighestReward.choose(&[], &mut rng), None);
    }
}
