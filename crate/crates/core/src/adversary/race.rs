//! Private-fork attacker node for the solution-stealing and short-term majority races.

use std::any::Any;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scripted::PlantedProblem;
use crate::consensus::{pocw_check, scan_nonces, ChainView};
use crate::crowdwork::SolutionClaim;
use crate::ledger::{
    commitment_digest, Address, Amount, Block, BlockHeader, ChainConfig, ChainState, Genesis, Hash256, Keypair,
    ProblemRef, ProblemStatus, Transaction, TxBody,
};
use crate::miner::{Miner, MinerConfig, MinerEvent, StepCounters};
use crate::netsim::{Envelope, Payload, SimNode};

/// What the private fork is for.
#[derive(Clone, Debug)]
pub enum RaceGoal {
    /// Copy the first foreign solution reveal and re-commit it on a fork that drops the
    /// honest commitment.
    StealSolution,
    /// Revert the attacker's own transfer `target` once it is confirmed `depth` deep, with
    /// power multiplied by `boost` for `boost_ticks` after the target is mined.
    Revert {
        target: Arc<Transaction>,
        depth: u64,
        boost: u64,
        boost_ticks: u64,
        /// Self-made problem mined on the fork to match a high-value victim block.
        own_problem: Option<PlantedProblem>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceStage {
    /// Mining honestly, waiting for the trigger.
    Waiting,
    /// Building the private fork.
    Racing,
    /// Fork released; still extending it.
    Published,
    /// Honest nodes built on the released fork.
    Adopted,
    GaveUp,
}

struct Branch {
    fork_parent: Hash256,
    base_value: u128,
    blocks: Vec<Arc<Block>>,
    state: ChainState,
    published: usize,
    /// Transactions to include as soon as they apply, in order.
    planned: Vec<Arc<Transaction>>,
    /// Problem whose settlement by the attacker completes the goal.
    problem: Option<Hash256>,
    /// Conflicting transaction that must be on the fork (revert goal).
    conflict: Option<Hash256>,
    /// Victim block whose depth gates release (revert goal).
    victim: Option<(Hash256, u64)>,
}

impl Branch {
    fn tip(&self) -> Hash256 {
        self.blocks.last().map(|b| b.hash()).unwrap_or(self.fork_parent)
    }

    fn value(&self) -> u128 {
        self.base_value + self.blocks.iter().map(|b| b.reward().0 as u128).sum::<u128>()
    }
}

/// Statistics reported by a finished race.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceReport {
    pub triggered_at: Option<u64>,
    /// Block the fork replaces (revert goal).
    pub victim: Option<Hash256>,
    pub released_at: Option<u64>,
    pub private_blocks: usize,
}

/// A miner that behaves honestly until its goal triggers, then mines a private fork and
/// releases it once the fork outweighs the public chain.
pub struct RaceAttacker {
    inner: Miner,
    key: Keypair,
    cfg: Arc<ChainConfig>,
    power: u64,
    goal: RaceGoal,
    stage: RaceStage,
    branch: Option<Branch>,
    counters: StepCounters,
    /// Give up when the public chain leads by more than this much value.
    max_deficit: u128,
    /// Give up this many ticks after the trigger.
    race_ticks: u64,
    report: RaceReport,
    /// Foreign reveal seen before its commitment reached our main chain.
    seen_reveal: Option<(Hash256, Hash256, SolutionClaim)>,
    events: Vec<MinerEvent>,
    rng: ChaCha8Rng,
}

impl RaceAttacker {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        key: Keypair,
        power: u64,
        cfg: Arc<ChainConfig>,
        genesis: &Genesis,
        goal: RaceGoal,
        max_deficit: u128,
        race_ticks: u64,
        seed: u64,
    ) -> Self {
        let miner_cfg = MinerConfig { power, solve_user_problems: false, ..MinerConfig::default() };
        RaceAttacker {
            inner: Miner::new(id, key.clone(), miner_cfg, cfg.clone(), genesis, seed),
            key,
            cfg,
            power,
            goal,
            stage: RaceStage::Waiting,
            branch: None,
            counters: StepCounters::default(),
            max_deficit,
            race_ticks,
            report: RaceReport::default(),
            seen_reveal: None,
            events: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
        }
    }

    pub fn stage(&self) -> RaceStage {
        self.stage
    }

    pub fn report(&self) -> RaceReport {
        self.report
    }

    pub fn address(&self) -> Address {
        self.key.address()
    }

    fn public(&self) -> &ChainView {
        self.inner.view()
    }

    fn public_value(&self) -> u128 {
        self.public().tree().aggregated_value(&self.public().tip()).unwrap_or(0)
    }

    fn sign(&self, nonce: u64, body: TxBody) -> Arc<Transaction> {
        Arc::new(if self.cfg.verify_signatures {
            Transaction::signed(&self.key, Amount::ZERO, nonce, body)
        } else {
            Transaction::unsigned(self.key.address(), Amount::ZERO, nonce, body)
        })
    }

    fn open_branch(&mut self, fork_parent: Hash256, planned: Vec<Arc<Transaction>>) -> Branch {
        let state = self.public().state_at(&fork_parent).expect("fork parent is known");
        let base_value = self.public().tree().aggregated_value(&fork_parent).expect("fork parent is known");
        Branch {
            fork_parent,
            base_value,
            blocks: Vec::new(),
            state,
            published: 0,
            planned,
            problem: None,
            conflict: None,
            victim: None,
        }
    }

    /// Main-chain height of the block carrying `tx`, searching back from the tip.
    fn find_on_main(&self, tx: &Hash256) -> Option<Arc<Block>> {
        self.public().main_blocks().rev().find(|b| b.txs.iter().any(|t| t.hash() == *tx)).cloned()
    }

    fn try_trigger_steal(&mut self, tick: u64, inbox: &[Envelope]) {
        let me = self.key.address();
        let reveal = inbox.iter().find_map(|env| match &env.payload {
            Payload::Tx(tx) if tx.sender != me => match &tx.body {
                TxBody::SolutionRevealing { problem_id, commitment_ref, solution, .. } => {
                    Some((*problem_id, *commitment_ref, solution.clone()))
                }
                _ => None,
            },
            _ => None,
        });
        if self.seen_reveal.is_none() {
            self.seen_reveal = reveal;
        }
        let Some((problem, commit_ref, solution)) = self.seen_reveal.clone() else { return };
        let Some(commit_block) = self.find_on_main(&commit_ref) else { return };
        let fork_parent = commit_block.parent();
        // Replay everything the fork drops except the honest claim on this problem.
        let dropped: Vec<Arc<Transaction>> = self
            .public()
            .main_blocks()
            .filter(|b| b.height() >= commit_block.height())
            .flat_map(|b| b.txs.iter().cloned())
            .filter(|t| !matches!(&t.body,
                TxBody::SolutionCommitment { problem_id, .. } | TxBody::SolutionRevealing { problem_id, .. }
                    if *problem_id == problem))
            .collect();
        let mut branch = self.open_branch(fork_parent, Vec::new());
        let nonce = branch.state.nonce(&me);
        let salt: [u8; 16] = self.rng.random();
        let digest = commitment_digest(&me, &solution, &salt);
        let commit = self.sign(nonce, TxBody::SolutionCommitment { problem_id: problem, digest });
        let reveal = self.sign(
            nonce + 1,
            TxBody::SolutionRevealing { problem_id: problem, commitment_ref: commit.hash(), solution, salt },
        );
        // Our own transactions go first so that dropped ones cannot take our nonces.
        branch.planned = [commit, reveal].into_iter().chain(dropped.into_iter().filter(|t| t.sender != me)).collect();
        branch.problem = Some(problem);
        self.start_race(tick, branch);
    }

    fn try_trigger_revert(&mut self, tick: u64) {
        let RaceGoal::Revert { target, own_problem, .. } = &self.goal else { return };
        let (target, own_problem) = (target.clone(), own_problem.clone());
        let me = self.key.address();
        if self.public().tip_state().nonce(&me) <= target.nonce {
            return;
        }
        let Some(victim) = self.find_on_main(&target.hash()) else { return };
        let dropped: Vec<Arc<Transaction>> =
            victim.txs.iter().filter(|t| t.sender != me).cloned().collect();
        let mut branch = self.open_branch(victim.parent(), Vec::new());
        let nonce = target.nonce;
        let conflict = self.sign(nonce, TxBody::Transfer { receiver: me, amount: Amount::ZERO });
        let mut planned = vec![conflict.clone()];
        if let Some(p) = own_problem {
            let salt: [u8; 16] = self.rng.random();
            let proposal = self.sign(nonce + 1, p.proposal(self.cfg.t_search_default));
            let commit = self.sign(nonce + 2, p.commitment(&me, salt));
            let reveal = self.sign(nonce + 3, p.reveal(commit.hash(), salt));
            planned.extend([proposal, commit, reveal]);
            branch.problem = Some(p.id());
        }
        planned.extend(dropped);
        branch.planned = planned;
        branch.conflict = Some(conflict.hash());
        branch.victim = Some((victim.hash(), victim.height()));
        self.report.victim = Some(victim.hash());
        self.start_race(tick, branch);
    }

    fn start_race(&mut self, tick: u64, branch: Branch) {
        self.branch = Some(branch);
        self.stage = RaceStage::Racing;
        self.report.triggered_at = Some(tick);
    }

    fn race_power(&self, tick: u64) -> u64 {
        match (&self.goal, self.report.triggered_at) {
            (RaceGoal::Revert { boost, boost_ticks, .. }, Some(t0)) if tick < t0 + boost_ticks => self.power * boost,
            _ => self.power,
        }
    }

    /// Planned transactions that apply on top of the branch, within the volume bound.
    fn select_planned(&self, branch: &Branch, height: u64, reward: Amount) -> Vec<Arc<Transaction>> {
        let me = self.key.address();
        let mut scratch = branch.state.clone();
        let mut volume = Amount::ZERO;
        let mut out = Vec::new();
        for tx in &branch.planned {
            let Ok(next_volume) = volume.checked_add(tx.volume()) else { continue };
            if !self.cfg.volume_allowed(next_volume, reward) {
                continue;
            }
            let mut trial = scratch.clone();
            if trial.apply_tx(tx, height, &me, &self.cfg).is_ok() {
                scratch = trial;
                volume = next_volume;
                out.push(tx.clone());
            }
        }
        out
    }

    fn mine_private(&mut self, tick: u64) -> Option<Block> {
        let branch = self.branch.as_ref()?;
        let parent_header = match branch.blocks.last() {
            Some(b) => b.header.clone(),
            None => self.public().tree().block(&branch.fork_parent)?.header.clone(),
        };
        if tick <= parent_header.timestamp {
            return None;
        }
        let me = self.key.address();
        let mut budget = self.race_power(tick);
        let header = |problem_ref, reward| BlockHeader {
            parent_hash: branch.tip(),
            height: parent_header.height + 1,
            timestamp: tick,
            miner: me,
            problem_ref,
            problem_reward: reward,
            tx_root: Hash256::ZERO,
        };
        let eligible = branch.problem.and_then(|p| match branch.state.problem(&p)?.status {
            ProblemStatus::Revealed { revealer, reveal_tx, reward, .. } if revealer == me => Some((reveal_tx, reward)),
            _ => None,
        });
        if let Some((reveal_tx, reward)) = eligible {
            if budget > 0 {
                budget -= 1;
                self.counters.pocw += 1;
                let txs = self.select_planned(branch, parent_header.height + 1, reward);
                let block = Block::new(header(ProblemRef::User { revealing_tx: reveal_tx }, reward), txs);
                if pocw_check(&block.header, tick, self.cfg.pocw_difficulty, reward, self.cfg.pow_hash).passed() {
                    self.counters.system += budget;
                    return Some(block);
                }
            }
        }
        self.counters.system += budget;
        if budget == 0 {
            return None;
        }
        let reward = self.cfg.system_reward;
        let txs = self.select_planned(branch, parent_header.height + 1, reward);
        let template = Block::new(header(ProblemRef::System { nonce: 0 }, reward), txs);
        let nonce = scan_nonces(&template.header, 0, budget, self.cfg.system_difficulty, self.cfg.pow_hash)?;
        let mut h = template.header.clone();
        h.problem_ref = ProblemRef::System { nonce };
        Some(Block::new(h, template.txs))
    }

    fn goal_met(&self, branch: &Branch) -> bool {
        let me = self.key.address();
        let solved = branch.problem.is_none_or(|p| {
            matches!(branch.state.problem(&p).map(|e| &e.status), Some(ProblemStatus::Settled { solver, .. }) if *solver == me)
        });
        let conflicted = branch.conflict.is_none_or(|c| branch.blocks.iter().any(|b| b.txs.iter().any(|t| t.hash() == c)));
        let deep = branch.victim.is_none_or(|(hash, height)| {
            let depth = if let RaceGoal::Revert { depth, .. } = &self.goal { *depth } else { 0 };
            !self.public().is_on_main(&hash) || self.public().height() + 1 >= height + depth
        });
        match &self.goal {
            // The fork only needs to outweigh the victim block; a matching problem is optional.
            RaceGoal::Revert { .. } => conflicted && deep,
            RaceGoal::StealSolution => solved,
        }
    }

    fn release(&mut self, tick: u64, out: &mut Vec<Payload>) {
        let Some(branch) = self.branch.as_mut() else { return };
        let fresh: Vec<Arc<Block>> = branch.blocks[branch.published..].to_vec();
        branch.published = branch.blocks.len();
        for block in fresh {
            self.inner.deliver(Payload::Block(block.clone()), tick);
            out.push(Payload::Block(block));
        }
        if self.report.released_at.is_none() {
            self.report.released_at = Some(tick);
        }
    }

    fn race_step(&mut self, tick: u64) -> Vec<Payload> {
        let mut out = Vec::new();
        if let Some(block) = self.mine_private(tick) {
            let block = Arc::new(block);
            let branch = self.branch.as_mut().expect("racing implies a branch");
            branch.state = branch.state.apply_block(&block, &self.cfg).expect("private block applies to its parent");
            branch.blocks.push(block.clone());
            self.report.private_blocks += 1;
            self.events.push(MinerEvent::Mined {
                tick,
                block: block.hash(),
                height: block.height(),
                user: !block.header.problem_ref.is_system(),
                reward: block.reward(),
                txs: block.txs.len(),
            });
        }
        let branch = self.branch.as_ref().expect("racing implies a branch");
        let (private, public) = (branch.value(), self.public_value());
        match self.stage {
            RaceStage::Racing if private > public && self.goal_met(branch) => {
                self.stage = RaceStage::Published;
                self.release(tick, &mut out);
            }
            RaceStage::Published => {
                self.release(tick, &mut out);
                let tip = self.branch.as_ref().expect("racing implies a branch").tip();
                if self.public().is_on_main(&tip) {
                    self.stage = RaceStage::Adopted;
                }
            }
            _ => {}
        }
        let started = self.report.triggered_at.unwrap_or(tick);
        let lost = public > private + self.max_deficit;
        let expired = match &self.goal {
            RaceGoal::Revert { boost_ticks, .. } => tick >= started + boost_ticks,
            RaceGoal::StealSolution => tick >= started + self.race_ticks,
        };
        if matches!(self.stage, RaceStage::Racing | RaceStage::Published) && (lost || expired) {
            self.stage = RaceStage::GaveUp;
        }
        out
    }
}

impl SimNode for RaceAttacker {
    fn step(&mut self, tick: u64, inbox: Vec<Envelope>) -> Vec<Payload> {
        if self.stage == RaceStage::Waiting && matches!(self.goal, RaceGoal::StealSolution) {
            for env in &inbox {
                if let Payload::Block(b) = &env.payload {
                    self.inner.deliver(Payload::Block(b.clone()), tick);
                }
            }
            self.try_trigger_steal(tick, &inbox);
        }
        match self.stage {
            RaceStage::Racing | RaceStage::Published => {
                for env in inbox {
                    self.inner.deliver(env.payload, tick);
                }
                self.race_step(tick)
            }
            RaceStage::Waiting => {
                let out = self.inner.step(tick, inbox);
                self.try_trigger_revert(tick);
                out
            }
            RaceStage::Adopted | RaceStage::GaveUp => self.inner.step(tick, inbox),
        }
    }

    fn absorb(&mut self, tick: u64, inbox: Vec<Envelope>) {
        for env in inbox {
            self.inner.deliver(env.payload, tick);
        }
    }

    fn view(&self) -> &ChainView {
        self.inner.view()
    }

    fn counters(&self) -> StepCounters {
        let mut c = self.inner.counters();
        c.add(&self.counters);
        c
    }

    fn drain_events(&mut self) -> Vec<MinerEvent> {
        let mut events = self.inner.drain_events();
        events.append(&mut self.events);
        events
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
