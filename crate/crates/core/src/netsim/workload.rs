//! User demand: Poisson arrivals of problem proposals and transfers.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::crowdwork::{generate_instance, Family, Preset};
use crate::ledger::{Address, Amount, ChainConfig, Keypair, Ratio, Transaction, TxBody};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Expected problem proposals per tick.
    pub problem_rate: f64,
    /// Expected transfers per tick.
    pub tx_rate: f64,
    pub users: usize,
    pub user_balance: u64,
    pub preset: Preset,
    /// Level-1 rewards are drawn uniformly from this inclusive range.
    pub reward_min: u64,
    pub reward_max: u64,
    /// Partial-solution reward as a fraction of the level-1 reward.
    pub partial_ratio: f64,
    /// Search window for proposals; `None` uses the chain default.
    #[serde(default)]
    pub t_search: Option<u64>,
    pub amount_min: u64,
    pub amount_max: u64,
    /// Fees are drawn uniformly from `[0, fee_ratio * amount]`.
    pub fee_ratio: f64,
    /// Problems stop being generated after this tick (transfers continue).
    #[serde(default)]
    pub problems_until: Option<u64>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            problem_rate: 0.05,
            tx_rate: 0.5,
            users: 20,
            user_balance: 1_000_000_000_000,
            preset: Preset::Sim,
            reward_min: 50_000,
            reward_max: 150_000,
            partial_ratio: 0.5,
            t_search: None,
            amount_min: 1,
            amount_max: 500,
            fee_ratio: 0.1,
            problems_until: None,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.problem_rate >= 0.0 && self.tx_rate >= 0.0) {
            return Err("arrival rates must be non-negative".into());
        }
        if self.users < 2 && self.tx_rate > 0.0 {
            return Err("transfers need at least two users".into());
        }
        if self.reward_min == 0 || self.reward_min > self.reward_max {
            return Err("reward range must be non-empty and positive".into());
        }
        if self.amount_min > self.amount_max {
            return Err("amount range is empty".into());
        }
        Ok(())
    }

    pub fn user_key(i: usize) -> Keypair {
        Keypair::derive(&format!("user-{i}"))
    }

    pub fn allocations(&self) -> Vec<(Address, Amount)> {
        (0..self.users).map(|i| (Self::user_key(i).address(), Amount(self.user_balance))).collect()
    }
}

/// Seeded generator; every arrival is signed by a funded user with the next nonce.
pub struct Workload {
    cfg: WorkloadConfig,
    chain: Arc<ChainConfig>,
    rng: ChaCha8Rng,
    keys: Vec<Keypair>,
    nonces: Vec<u64>,
    pub problems_generated: u64,
    pub family_counts: [u64; 3],
    pub transfers_generated: u64,
}

impl Workload {
    pub fn new(cfg: WorkloadConfig, chain: Arc<ChainConfig>, seed: u64) -> Self {
        let keys = (0..cfg.users).map(WorkloadConfig::user_key).collect();
        let nonces = vec![0; cfg.users];
        Workload {
            cfg,
            chain,
            rng: ChaCha8Rng::seed_from_u64(seed),
            keys,
            nonces,
            problems_generated: 0,
            family_counts: [0; 3],
            transfers_generated: 0,
        }
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.cfg
    }

    fn arrivals(&mut self, rate: f64) -> u64 {
        if rate <= 0.0 {
            return 0;
        }
        Poisson::new(rate).map(|p| p.sample(&mut self.rng) as u64).unwrap_or(0)
    }

    /// Transactions arriving during `tick`.
    pub fn generate(&mut self, tick: u64) -> Vec<Arc<Transaction>> {
        let mut out = Vec::new();
        let problems_on = self.cfg.problems_until.is_none_or(|end| tick < end);
        let n_problems = if problems_on { self.arrivals(self.cfg.problem_rate) } else { 0 };
        for _ in 0..n_problems {
            if self.cfg.users == 0 {
                break;
            }
            let user = self.rng.random_range(0..self.cfg.users);
            let body = self.proposal_body();
            out.push(self.sign(user, Amount::ZERO, body));
        }
        let n_tx = self.arrivals(self.cfg.tx_rate);
        for _ in 0..n_tx {
            let from = self.rng.random_range(0..self.cfg.users);
            let mut to = self.rng.random_range(0..self.cfg.users - 1);
            if to >= from {
                to += 1;
            }
            let amount = self.rng.random_range(self.cfg.amount_min..=self.cfg.amount_max);
            let fee_cap = (amount as f64 * self.cfg.fee_ratio).floor() as u64;
            let fee = self.rng.random_range(0..=fee_cap.min(amount));
            let body = TxBody::Transfer { receiver: self.keys[to].address(), amount: Amount(amount) };
            out.push(self.sign(from, Amount(fee), body));
            self.transfers_generated += 1;
        }
        out
    }

    fn proposal_body(&mut self) -> TxBody {
        let family = *Family::GENERATED.choose(&mut self.rng).expect("non-empty");
        let idx = Family::GENERATED.iter().position(|f| *f == family).expect("listed");
        self.family_counts[idx] += 1;
        self.problems_generated += 1;
        let params = self.cfg.preset.params(family).expect("generated families have presets");
        let seed = self.rng.random();
        let instance = generate_instance(params, seed).expect("preset sizes are supported");
        let top = Amount(self.rng.random_range(self.cfg.reward_min..=self.cfg.reward_max));
        let table = instance.spec.tiered_table(top, Ratio::from_f64(self.cfg.partial_ratio), self.chain.min_portion);
        TxBody::ProblemProposal {
            spec: Arc::new(instance.spec),
            reward_table: Arc::new(table),
            t_search: self.cfg.t_search.unwrap_or(self.chain.t_search_default),
        }
    }

    fn sign(&mut self, user: usize, fee: Amount, body: TxBody) -> Arc<Transaction> {
        let nonce = self.nonces[user];
        self.nonces[user] += 1;
        let key = &self.keys[user];
        Arc::new(if self.chain.verify_signatures {
            Transaction::signed(key, fee, nonce, body)
        } else {
            Transaction::unsigned(key.address(), fee, nonce, body)
        })
    }
}
