//! Block eligibility rules: the PoCW condition and the system hash puzzle.

use primitive_types::U256;

use crate::ledger::{Amount, BlockHeader, Difficulty, PowHash};

/// Result of one PoCW trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PocwResult {
    Pass,
    Fail,
    /// `D * R` reached 2^256, so every digest passes. Signals a misconfigured difficulty.
    PassSaturated,
}

impl PocwResult {
    pub fn passed(self) -> bool {
        !matches!(self, PocwResult::Fail)
    }
}

/// `D * R`, or `None` when the product reaches 2^256.
pub fn pocw_threshold(difficulty: Difficulty, reward: Amount) -> Option<U256> {
    if difficulty.is_cap() && reward.0 > 0 {
        return None;
    }
    difficulty.0.checked_mul(U256::from(reward.0))
}

/// One trial: `H(timestamp || header without timestamp) < D * R_problem`.
pub fn pocw_check(
    header: &BlockHeader,
    timestamp: u64,
    difficulty: Difficulty,
    reward: Amount,
    hash: PowHash,
) -> PocwResult {
    if reward.is_zero() {
        return PocwResult::Fail;
    }
    let Some(threshold) = pocw_threshold(difficulty, reward) else {
        return PocwResult::PassSaturated;
    };
    let digest = hash.digest_parts(&[&timestamp.to_be_bytes(), &header.bytes_without_timestamp()]);
    if digest.to_u256() < threshold {
        PocwResult::Pass
    } else {
        PocwResult::Fail
    }
}

/// `H(header without nonce || nonce) < D_sys`. The cap value accepts every nonce.
pub fn system_puzzle_check(header: &BlockHeader, nonce: u64, target: Difficulty, hash: PowHash) -> bool {
    if target.is_cap() {
        return true;
    }
    if target == Difficulty::ZERO {
        return false;
    }
    let digest = hash.digest_parts(&[&header.bytes_without_nonce(), &nonce.to_be_bytes()]);
    digest.to_u256() < target.0
}

/// Scans `count` nonces from `start` for a puzzle solution, reusing the hashed header prefix.
pub fn scan_nonces(header: &BlockHeader, start: u64, count: u64, target: Difficulty, hash: PowHash) -> Option<u64> {
    if target.is_cap() {
        return (count > 0).then_some(start);
    }
    if target == Difficulty::ZERO {
        return None;
    }
    let primed = hash.primed(&header.bytes_without_nonce());
    (start..start.saturating_add(count)).find(|n| primed.finish_with(&n.to_be_bytes()).to_u256() < target.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Address, Hash256, ProblemRef};

    fn header() -> BlockHeader {
        BlockHeader {
            parent_hash: Hash256([1; 32]),
            height: 1,
            timestamp: 0,
            miner: Address(Hash256([2; 32])),
            problem_ref: ProblemRef::System { nonce: 0 },
            problem_reward: Amount(10),
            tx_root: Hash256::ZERO,
        }
    }

    #[test]
    fn zero_reward_never_passes() {
        let h = header();
        assert!((0..1000).all(|t| pocw_check(&h, t, Difficulty::CAP, Amount(0), PowHash::Sha256) == PocwResult::Fail));
    }

    #[test]
    fn saturated_threshold_always_passes() {
        let h = header();
        for t in 0..100 {
            assert_eq!(pocw_check(&h, t, Difficulty::pow2(255), Amount(2), PowHash::Sha256), PocwResult::PassSaturated);
        }
    }

    #[test]
    fn puzzle_extremes() {
        let h = header();
        assert!((0..100).all(|n| system_puzzle_check(&h, n, Difficulty::CAP, PowHash::Sha256)));
        assert!((0..100).all(|n| !system_puzzle_check(&h, n, Difficulty::ZERO, PowHash::Sha256)));
    }

    #[test]
    fn scan_agrees_with_single_checks() {
        let h = header();
        let target = Difficulty::pow2(250);
        let found = scan_nonces(&h, 0, 10_000, target, PowHash::Sha256).unwrap();
        assert!(system_puzzle_check(&h, found, target, PowHash::Sha256));
        assert!((0..found).all(|n| !system_puzzle_check(&h, n, target, PowHash::Sha256)));
    }
}
