use primitive_types::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::crypto::PowHash;
use super::primitives::{Amount, Difficulty, Ratio};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("burn ratio must be below 1")]
    BurnRatio,
    #[error("T_min ({t_min}) must be below T_max ({t_max})")]
    RevealWindow { t_min: u64, t_max: u64 },
    #[error("search window must be at least one block")]
    SearchWindow,
    #[error("minimum portion must be in (0, 1]")]
    MinPortion,
    #[error("difficulty times maximum reward exceeds 2^256")]
    ThresholdOverflow,
    #[error("system reward {0} exceeds the maximum reward")]
    SystemReward(Amount),
}

/// Protocol parameters shared by every node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Reward-burning ratio `k`.
    pub burn_ratio: Ratio,
    /// PoCW difficulty `D`, a threshold per token unit of problem reward.
    pub pocw_difficulty: Difficulty,
    /// System problem reward `R~`.
    pub system_reward: Amount,
    /// System puzzle threshold.
    pub system_difficulty: Difficulty,
    pub t_min: u64,
    pub t_max: u64,
    /// Search window used when a proposal does not choose one.
    pub t_search_default: u64,
    /// Full-refund horizon after the search window; `None` means twice the proposal's window.
    #[serde(default)]
    pub t_expire: Option<u64>,
    /// System minimum portion `xi` for the lowest reward level.
    pub min_portion: Ratio,
    /// Largest admissible problem reward; bounds `D * R` below 2^256.
    pub max_reward: Amount,
    #[serde(default)]
    pub pow_hash: PowHash,
    #[serde(default = "default_true")]
    pub verify_signatures: bool,
    /// Transaction volume bound. Only a plain-PoW comparison baseline turns this off.
    #[serde(default = "default_true")]
    pub enforce_volume_constraint: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_ratio: Ratio::from_f64(0.05),
            pocw_difficulty: Difficulty::from_probability(1.0 / 20.0 / 100_000.0),
            system_reward: Amount(50_000),
            system_difficulty: Difficulty::from_probability(1.0 / 3200.0),
            t_min: 5,
            t_max: 30,
            t_search_default: 10,
            t_expire: None,
            min_portion: Ratio::from_f64(0.1),
            max_reward: Amount(1_000_000),
            pow_hash: PowHash::Sha256,
            verify_signatures: true,
            enforce_volume_constraint: true,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.burn_ratio >= Ratio::ONE {
            return Err(ConfigError::BurnRatio);
        }
        if self.t_min >= self.t_max {
            return Err(ConfigError::RevealWindow { t_min: self.t_min, t_max: self.t_max });
        }
        if self.t_search_default == 0 {
            return Err(ConfigError::SearchWindow);
        }
        if self.min_portion == Ratio::ZERO {
            return Err(ConfigError::MinPortion);
        }
        if self.pocw_difficulty.0.checked_mul(U256::from(self.max_reward.0)).is_none() {
            return Err(ConfigError::ThresholdOverflow);
        }
        if self.system_reward > self.max_reward {
            return Err(ConfigError::SystemReward(self.system_reward));
        }
        Ok(())
    }

    pub fn expire_after(&self, t_search: u64) -> u64 {
        self.t_expire.unwrap_or(2 * t_search)
    }

    /// Portion of a reward burned: `ceil(k * reward)`, so rounding never favors the miner.
    pub fn burn_of(&self, reward: Amount) -> Amount {
        self.burn_ratio.apply_ceil(reward)
    }

    /// Portion of a reward paid to the miner: `reward - ceil(k * reward)`.
    pub fn miner_share(&self, reward: Amount) -> Amount {
        Amount(reward.0 - self.burn_of(reward).0)
    }

    /// Constraint on a block's transferred volume: `volume < k * reward`, strictly.
    pub fn volume_allowed(&self, volume: Amount, reward: Amount) -> bool {
        !self.enforce_volume_constraint || self.burn_ratio.strictly_exceeds(volume, reward)
    }
}
