//! Seeded network trials for the race attacks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::race::{RaceAttacker, RaceGoal, RaceStage};
use super::scripted::PlantedProblem;
use super::stats::{PairedStats, RateStats};
use super::{AttackError, AttackOutcome};
use crate::ledger::{Amount, ChainConfig, Difficulty, Genesis, Keypair, ProblemStatus, Ratio, Transaction, TxBody};
use crate::miner::{Miner, MinerConfig};
use crate::netsim::{LatencyModel, NetworkConfig, Payload, SimNode, Simulation, Topology};

/// Shared world for race trials: honest miners, the attacker, and chain parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaceSetup {
    pub honest_nodes: usize,
    /// Steps per tick shared by all honest miners.
    pub honest_power: u64,
    pub chain: ChainConfig,
    pub network: NetworkConfig,
    /// Reward of the honest problem.
    pub problem_reward: Amount,
    /// Hard stop for a trial.
    pub max_ticks: u64,
    /// Solution stealing: ticks the attacker races after seeing the reveal.
    pub race_ticks: u64,
    /// The attacker gives up once the public chain leads by this many system rewards.
    pub max_deficit_blocks: u64,
}

impl Default for RaceSetup {
    fn default() -> Self {
        RaceSetup {
            honest_nodes: 3,
            honest_power: 100,
            chain: ChainConfig {
                verify_signatures: false,
                system_difficulty: Difficulty::from_probability(1.0 / 1600.0),
                ..ChainConfig::default()
            },
            network: NetworkConfig {
                topology: Topology::Mesh,
                latency: LatencyModel { base: 1, jitter: 1, drop_rate: 0.0 },
                partitions: Vec::new(),
            },
            problem_reward: Amount(100_000),
            max_ticks: 20_000,
            race_ticks: 4_000,
            max_deficit_blocks: 20,
        }
    }
}

/// One trial's result, as written to CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub succeeded: bool,
    /// The attack started (the trigger was observed).
    pub triggered: bool,
    pub ticks: u64,
    pub payoff: i128,
}

impl TrialRecord {
    pub fn into_outcome(self) -> AttackOutcome {
        AttackOutcome {
            succeeded: self.succeeded,
            validated: true,
            rejection: None,
            realized_payoff: self.payoff,
            analytic_payoff: None,
            ticks: self.ticks,
        }
    }
}

fn sign(cfg: &ChainConfig, key: &Keypair, nonce: u64, body: TxBody) -> Arc<Transaction> {
    Arc::new(if cfg.verify_signatures {
        Transaction::signed(key, Amount::ZERO, nonce, body)
    } else {
        Transaction::unsigned(key.address(), Amount::ZERO, nonce, body)
    })
}

fn honest_miners(setup: &RaceSetup, cfg: &Arc<ChainConfig>, genesis: &Genesis, seed: u64) -> Vec<Box<dyn SimNode>> {
    let n = setup.honest_nodes.max(1) as u64;
    (0..n)
        .map(|i| {
            let power = setup.honest_power / n + u64::from(i < setup.honest_power % n);
            let mc = MinerConfig { power, ..MinerConfig::default() };
            let key = Keypair::derive(&format!("race-honest-{i}-{seed}"));
            Box::new(Miner::new(i as usize, key, mc, cfg.clone(), genesis, seed.wrapping_mul(31).wrapping_add(i)))
                as Box<dyn SimNode>
        })
        .collect()
}

fn attacker_of(sim: &Simulation) -> &RaceAttacker {
    let id = sim.nodes().len() - 1;
    sim.node::<RaceAttacker>(id).expect("last node is the attacker")
}

/// Steps until the attacker settles or the stop condition holds, then drains the network.
fn drive(sim: &mut Simulation, max_ticks: u64, mut done: impl FnMut(&Simulation) -> bool) {
    while sim.tick() < max_ticks {
        sim.step();
        if matches!(attacker_of(sim).stage(), RaceStage::Adopted | RaceStage::GaveUp) || done(sim) {
            break;
        }
    }
    sim.quiesce();
}

/// Attacker with a fraction `alpha` of total power watches for a solution reveal and tries to
/// claim the reward on a fork that predates the honest commitment.
pub fn steal_trial(setup: &RaceSetup, t_min: u64, alpha: f64, seed: u64) -> Result<TrialRecord, AttackError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(AttackError::Inconsistent("alpha must be in [0, 1)".into()));
    }
    let cfg = ChainConfig { t_min, t_max: t_min.max(setup.chain.t_max.saturating_sub(1)) + 1, ..setup.chain.clone() };
    cfg.validate().map_err(|e| AttackError::Setup(e.to_string()))?;
    let cfg = Arc::new(cfg);
    let proposer = Keypair::derive(&format!("race-proposer-{seed}"));
    let attacker_key = Keypair::derive(&format!("race-attacker-{seed}"));
    let genesis = Genesis::new(vec![(proposer.address(), Amount(setup.problem_reward.0 * 2)), (attacker_key.address(), Amount::ZERO)]);

    let total = setup.honest_power as f64 / (1.0 - alpha);
    let attacker_power = (total * alpha).round() as u64;
    let mut nodes = honest_miners(setup, &cfg, &genesis, seed);
    let id = nodes.len();
    let max_deficit = setup.max_deficit_blocks as u128 * cfg.system_reward.0 as u128;
    nodes.push(Box::new(RaceAttacker::new(
        id,
        attacker_key.clone(),
        attacker_power,
        cfg.clone(),
        &genesis,
        RaceGoal::StealSolution,
        max_deficit,
        setup.race_ticks,
        seed ^ 0xa11ce,
    )));
    let mut sim = Simulation::new(nodes, setup.network.clone(), None, seed);
    let problem = PlantedProblem::new(seed, setup.problem_reward, cfg.min_portion);
    sim.inject(Payload::Tx(sign(&cfg, &proposer, 0, problem.proposal(cfg.t_search_default))));

    let id = problem.id();
    let settled_honestly = |sim: &Simulation| {
        let me = attacker_of(sim).address();
        attacker_of(sim).stage() == RaceStage::Waiting
            && matches!(sim.nodes()[0].view().tip_state().problem(&id).map(|e| &e.status),
                Some(ProblemStatus::Settled { solver, .. }) if *solver != me)
    };
    drive(&mut sim, setup.max_ticks, settled_honestly);

    let attacker = attacker_of(&sim);
    let me = attacker.address();
    let honest = &sim.nodes()[..id_index(&sim)];
    let succeeded = honest.iter().all(|n| {
        matches!(n.view().tip_state().problem(&id).map(|e| &e.status),
            Some(ProblemStatus::Settled { solver, .. }) if *solver == me)
    });
    let payoff = honest[0].view().tip_state().balance(&me).0 as i128;
    Ok(TrialRecord {
        seed,
        succeeded,
        triggered: attacker.report().triggered_at.is_some(),
        ticks: sim.tick(),
        payoff,
    })
}

fn id_index(sim: &Simulation) -> usize {
    sim.nodes().len() - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortTermMode {
    /// Full protocol: the target needs a high-reward user block, fork choice weighs value.
    CrowdMine,
    /// System blocks only and no volume constraint: plain longest-chain proof of work.
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortTermParams {
    pub mode: ShortTermMode,
    /// Attacker steps per tick before and after the boost.
    pub attacker_power: u64,
    /// Power multiple during the boost.
    pub boost: u64,
    /// Boost length in ticks, starting when the target is mined.
    pub duration: u64,
    /// Confirmations the target must have before the fork is released.
    pub depth: u64,
    /// Value of the transfer the attacker tries to revert.
    pub value: Amount,
}

/// Reward a block needs to carry a transfer of `value` under burn ratio `k`, plus a margin.
pub fn reward_for_value(value: Amount, k: Ratio) -> Amount {
    let min = (value.0 as u128 * Ratio::SCALE as u128 / k.ppm().max(1) as u128) as u64 + 1;
    Amount(min + min / 4)
}

/// The attacker pays a merchant, then tries to revert the payment with boosted power.
pub fn short_term_trial(setup: &RaceSetup, p: &ShortTermParams, seed: u64) -> Result<TrialRecord, AttackError> {
    if p.boost == 0 || p.duration == 0 {
        return Err(AttackError::Inconsistent("boost and duration must be positive".into()));
    }
    let mut cfg = setup.chain.clone();
    if p.mode == ShortTermMode::Baseline {
        cfg.enforce_volume_constraint = false;
    }
    let reward = reward_for_value(p.value, cfg.burn_ratio);
    cfg.max_reward = Amount(cfg.max_reward.0.max(reward.0));
    cfg.validate().map_err(|e| AttackError::Setup(e.to_string()))?;
    let cfg = Arc::new(cfg);

    let proposer = Keypair::derive(&format!("race-proposer-{seed}"));
    let attacker_key = Keypair::derive(&format!("race-attacker-{seed}"));
    let merchant = Keypair::derive(&format!("race-merchant-{seed}")).address();
    let start_balance = Amount(p.value.0 + reward.0 + 1_000);
    let genesis = Genesis::new(vec![
        (proposer.address(), Amount(reward.0 * 2)),
        (attacker_key.address(), start_balance),
        (merchant, Amount::ZERO),
    ]);
    let target = sign(&cfg, &attacker_key, 0, TxBody::Transfer { receiver: merchant, amount: p.value });
    let own_problem = (p.mode == ShortTermMode::CrowdMine)
        .then(|| PlantedProblem::new(seed ^ 0x0b5e55ed, reward, cfg.min_portion));

    let mut nodes = honest_miners(setup, &cfg, &genesis, seed);
    let id = nodes.len();
    let max_deficit = setup.max_deficit_blocks as u128 * cfg.system_reward.0 as u128;
    let goal = RaceGoal::Revert { target: target.clone(), depth: p.depth, boost: p.boost, boost_ticks: p.duration, own_problem };
    nodes.push(Box::new(RaceAttacker::new(
        id,
        attacker_key.clone(),
        p.attacker_power,
        cfg.clone(),
        &genesis,
        goal,
        max_deficit,
        p.duration,
        seed ^ 0xa11ce,
    )));
    let mut sim = Simulation::new(nodes, setup.network.clone(), None, seed);
    if p.mode == ShortTermMode::CrowdMine {
        let problem = PlantedProblem::new(seed, reward, cfg.min_portion);
        sim.inject(Payload::Tx(sign(&cfg, &proposer, 0, problem.proposal(cfg.t_search_default))));
    }
    sim.inject(Payload::Tx(target.clone()));
    drive(&mut sim, setup.max_ticks, |_| false);

    let attacker = attacker_of(&sim);
    let me = attacker.address();
    let honest = &sim.nodes()[..id_index(&sim)];
    let triggered = attacker.report().triggered_at.is_some();
    let reverted = |n: &Box<dyn SimNode>| {
        let s = n.view().tip_state();
        s.nonce(&me) > 0 && !n.view().main_blocks().any(|b| b.txs.iter().any(|t| t.hash() == target.hash()))
    };
    let succeeded = triggered && honest.iter().all(reverted);
    let payoff = honest[0].view().tip_state().balance(&me).0 as i128 - start_balance.0 as i128;
    Ok(TrialRecord { seed, succeeded, triggered, ticks: sim.tick(), payoff })
}

/// `trials` independent steal trials with seeds `seed..seed + trials`.
pub fn run_solution_steal(
    setup: &RaceSetup,
    t_min: u64,
    alpha: f64,
    trials: u64,
    seed: u64,
) -> Result<(RateStats, Vec<TrialRecord>), AttackError> {
    let records = (0..trials)
        .into_par_iter()
        .map(|i| steal_trial(setup, t_min, alpha, seed + i))
        .collect::<Result<Vec<_>, _>>()?;
    let wins = records.iter().filter(|r| r.succeeded).count() as u64;
    Ok((RateStats::new(wins, trials), records))
}

/// Paired short-term trials: each seed runs once under CrowdMine rules and once under the
/// baseline. `first` in the result is CrowdMine, `second` the baseline.
pub fn run_short_term_51(
    setup: &RaceSetup,
    params: &ShortTermParams,
    trials: u64,
    seed: u64,
) -> Result<(PairedStats, Vec<(TrialRecord, TrialRecord)>), AttackError> {
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let cm = ShortTermParams { mode: ShortTermMode::CrowdMine, ..params.clone() };
            let base = ShortTermParams { mode: ShortTermMode::Baseline, ..params.clone() };
            Ok((short_term_trial(setup, &cm, seed + i)?, short_term_trial(setup, &base, seed + i)?))
        })
        .collect::<Result<Vec<_>, AttackError>>()?;
    let pairs: Vec<(bool, bool)> = records.iter().map(|(a, b)| (a.succeeded, b.succeeded)).collect();
    Ok((PairedStats::from_pairs(&pairs), records))
}
