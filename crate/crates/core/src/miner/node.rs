//! The honest miner state machine.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assemble::assemble_block;
use super::mempool::Mempool;
use super::select::{select_problem, ProblemChoice, SelectionKind, SelectionStrategy};
use crate::consensus::{pocw_check, scan_nonces, ChainUpdate, ChainView};
use crate::crowdwork::quality::level_for;
use crate::crowdwork::{solve, verify_solution, ClaimKind, SolutionClaim, SolveOutcome};
use crate::ledger::crypto::sha256_parts;
use crate::ledger::{
    commitment_digest, Address, Amount, Block, BlockHeader, ChainConfig, Genesis, Hash256, Keypair, ProblemRef, ProblemStatus,
    Transaction, TxBody,
};
use crate::netsim::{Envelope, Payload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerConfig {
    /// Search or hash steps per tick.
    pub power: u64,
    /// Solver step cap per problem before falling back to a lower-quality claim.
    pub solve_budget: u64,
    pub max_block_txs: usize,
    pub mempool_capacity: usize,
    pub selection: SelectionKind,
    /// When false the miner only works on system problems.
    pub solve_user_problems: bool,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            power: 64,
            solve_budget: 2_000_000,
            max_block_txs: 256,
            mempool_capacity: 20_000,
            selection: SelectionKind::HighestReward,
            solve_user_problems: true,
        }
    }
}

/// Steps spent per activity. The sum equals `power * ticks`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounters {
    pub user: u64,
    pub system: u64,
    pub pocw: u64,
}

impl StepCounters {
    pub fn total(&self) -> u64 {
        self.user + self.system + self.pocw
    }

    pub fn add(&mut self, other: &StepCounters) {
        self.user += other.user;
        self.system += other.system;
        self.pocw += other.pocw;
    }

    pub fn since(&self, earlier: &StepCounters) -> StepCounters {
        StepCounters { user: self.user - earlier.user, system: self.system - earlier.system, pocw: self.pocw - earlier.pocw }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "problem", rename_all = "snake_case")]
pub enum Phase {
    SolvingSystem,
    SolvingUser(Hash256),
    AwaitCommitInclusion(Hash256),
    AwaitReveal(Hash256),
    PocwTrials(Hash256),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MinerEvent {
    Phase { tick: u64, phase: Phase },
    Committed { tick: u64, problem: Hash256, tx: Hash256, level: u32 },
    Revealed { tick: u64, problem: Hash256, tx: Hash256 },
    Mined { tick: u64, block: Hash256, height: u64, user: bool, reward: Amount, txs: usize },
    Abandoned { tick: u64, problem: Hash256 },
    Reorg { tick: u64, orphaned: usize, adopted: usize },
}

struct Job {
    problem: Hash256,
    outcome: SolveOutcome,
    remaining: u64,
}

#[derive(Clone)]
struct Claim {
    problem: Hash256,
    solution: SolutionClaim,
    salt: [u8; 16],
    commit: Arc<Transaction>,
    reveal: Option<Arc<Transaction>>,
}

/// An honest miner: selects problems, solves them under a step budget, runs commit-reveal,
/// performs PoCW trials, and hashes the system puzzle with spare steps.
pub struct Miner {
    id: usize,
    key: Keypair,
    cfg: MinerConfig,
    chain_cfg: Arc<ChainConfig>,
    view: ChainView,
    mempool: Mempool,
    strategy: Box<dyn SelectionStrategy>,
    rng: ChaCha8Rng,
    job: Option<Job>,
    claim: Option<Claim>,
    skip: BTreeSet<Hash256>,
    own_sent: BTreeMap<u64, Arc<Transaction>>,
    counters: StepCounters,
    phase: Phase,
    events: Vec<MinerEvent>,
    tx_cache: Option<(TemplateKey, Vec<Arc<Transaction>>)>,
}

/// Inputs that determine a candidate's transaction list.
type TemplateKey = (Hash256, u64, Amount);

impl Miner {
    pub fn new(id: usize, key: Keypair, cfg: MinerConfig, chain_cfg: Arc<ChainConfig>, genesis: &Genesis, seed: u64) -> Self {
        let view = ChainView::new(chain_cfg.clone(), genesis).expect("genesis allocations fit in u64");
        let strategy = cfg.selection.build();
        Miner {
            id,
            key,
            mempool: Mempool::new(cfg.mempool_capacity),
            cfg,
            chain_cfg,
            view,
            strategy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            job: None,
            claim: None,
            skip: BTreeSet::new(),
            own_sent: BTreeMap::new(),
            counters: StepCounters::default(),
            phase: Phase::SolvingSystem,
            events: Vec::new(),
            tx_cache: None,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn address(&self) -> Address {
        self.key.address()
    }

    pub fn view(&self) -> &ChainView {
        &self.view
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn counters(&self) -> StepCounters {
        self.counters
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> &MinerConfig {
        &self.cfg
    }

    pub fn drain_events(&mut self) -> Vec<MinerEvent> {
        std::mem::take(&mut self.events)
    }

    /// One tick: deliver messages, advance the workflow, spend `power` steps.
    pub fn step(&mut self, tick: u64, inbox: Vec<Envelope>) -> Vec<Payload> {
        let mut out = Vec::new();
        for env in inbox {
            self.deliver(env.payload, tick);
        }
        self.refresh_claim(tick, &mut out);
        self.refresh_job(tick);

        let mut budget = self.cfg.power;
        if let Some((reveal_tx, reward)) = self.revealed_claim() {
            budget -= 1;
            self.counters.pocw += 1;
            if let Some(block) = self.try_user_block(tick, reveal_tx, reward) {
                self.publish(block, tick, &mut out);
            }
        }
        if self.job.is_none() && self.claim.is_none() && self.cfg.solve_user_problems {
            self.start_job();
        }
        if let Some(job) = &mut self.job {
            if job.remaining > 0 {
                let spend = job.remaining.min(budget);
                job.remaining -= spend;
                budget -= spend;
                self.counters.user += spend;
            }
            if job.remaining == 0 {
                self.finish_job(tick, &mut out);
            }
        }
        self.counters.system += budget;
        if budget > 0 {
            if let Some(block) = self.try_system_block(tick, budget) {
                self.publish(block, tick, &mut out);
            }
        }
        self.update_phase(tick);
        out
    }

    /// Accepts a message without spending compute (also used to seed local transactions).
    pub fn deliver(&mut self, payload: Payload, tick: u64) {
        match payload {
            Payload::Tx(tx) => {
                self.mempool.add(tx, self.view.tip_state());
            }
            Payload::Block(block) => {
                let update = self.view.receive(block, Some(tick));
                self.on_update(&update, tick);
            }
        }
    }

    fn on_update(&mut self, update: &ChainUpdate, tick: u64) {
        if !update.tip_changed() {
            return;
        }
        if update.is_reorg() {
            self.events.push(MinerEvent::Reorg { tick, orphaned: update.orphaned.len(), adopted: update.adopted.len() });
        }
        let state = self.view.tip_state().clone();
        for block in &update.orphaned {
            for tx in &block.txs {
                self.mempool.add(tx.clone(), &state);
            }
        }
        self.mempool.reconcile(&state);
    }

    fn publish(&mut self, block: Block, tick: u64, out: &mut Vec<Payload>) {
        let block = Arc::new(block);
        let update = self.view.receive(block.clone(), Some(tick));
        assert!(update.rejected.is_empty(), "miner {} produced an invalid block: {:?}", self.id, update.rejected);
        self.events.push(MinerEvent::Mined {
            tick,
            block: block.hash(),
            height: block.height(),
            user: !block.header.problem_ref.is_system(),
            reward: block.reward(),
            txs: block.txs.len(),
        });
        self.on_update(&update, tick);
        out.push(Payload::Block(block));
    }

    fn next_nonce(&self) -> u64 {
        let on_chain = self.view.tip_state().nonce(&self.key.address());
        let issued = self.own_sent.keys().next_back().map(|n| n + 1).unwrap_or(0);
        on_chain.max(issued)
    }

    fn send_own(&mut self, body: TxBody, out: &mut Vec<Payload>) -> Arc<Transaction> {
        let nonce = self.next_nonce();
        self.send_own_at(nonce, body, out)
    }

    fn send_own_at(&mut self, nonce: u64, body: TxBody, out: &mut Vec<Payload>) -> Arc<Transaction> {
        let tx = Arc::new(if self.chain_cfg.verify_signatures {
            Transaction::signed(&self.key, Amount::ZERO, nonce, body)
        } else {
            Transaction::unsigned(self.key.address(), Amount::ZERO, nonce, body)
        });
        self.own_sent.insert(nonce, tx.clone());
        self.mempool.add(tx.clone(), self.view.tip_state());
        out.push(Payload::Tx(tx.clone()));
        tx
    }

    /// Re-broadcasts own transactions that fell out of the pool (e.g. after a reorg).
    fn ensure_own_pending(&mut self, out: &mut Vec<Payload>) {
        let me = self.key.address();
        let on_chain = self.view.tip_state().nonce(&me);
        self.own_sent.retain(|n, _| *n + 64 >= on_chain);
        for (nonce, tx) in self.own_sent.range(on_chain..) {
            if self.mempool.get(&me, *nonce).map(|t| t.hash()) != Some(tx.hash()) {
                self.mempool.add(tx.clone(), self.view.tip_state());
                out.push(Payload::Tx(tx.clone()));
            }
        }
    }

    fn refresh_claim(&mut self, tick: u64, out: &mut Vec<Payload>) {
        self.ensure_own_pending(out);
        let Some(claim) = self.claim.clone() else { return };
        let me = self.key.address();
        let cfg = self.chain_cfg.clone();
        let state = self.view.tip_state();
        let Some(entry) = state.problem(&claim.problem) else {
            self.abandon_claim(tick, out);
            return;
        };
        match entry.status {
            ProblemStatus::Committed { commit_tx, height: committed, .. } if commit_tx == claim.commit.hash() => {
                if claim.reveal.is_some() {
                    return;
                }
                let next = state.height() + 1;
                let level = claim.solution.claimed_level;
                let window_open = next >= committed + cfg.t_min && next <= committed + cfg.t_max;
                let quality_ok = level == 1 || next >= entry.search_closes_at();
                if window_open && quality_ok {
                    let body = TxBody::SolutionRevealing {
                        problem_id: claim.problem,
                        commitment_ref: commit_tx,
                        solution: claim.solution.clone(),
                        salt: claim.salt,
                    };
                    let tx = self.send_own(body, out);
                    self.events.push(MinerEvent::Revealed { tick, problem: claim.problem, tx: tx.hash() });
                    if let Some(c) = &mut self.claim {
                        c.reveal = Some(tx);
                    }
                }
            }
            ProblemStatus::Revealed { revealer, .. } if revealer == me => {}
            ProblemStatus::Open => {
                if claim.commit.nonce < state.nonce(&me) {
                    // Our commitment landed and was voided after T_max: commit again.
                    self.recommit(tick, out);
                }
            }
            _ => self.abandon_claim(tick, out),
        }
    }

    fn recommit(&mut self, tick: u64, out: &mut Vec<Payload>) {
        let Some(claim) = self.claim.clone() else { return };
        let salt: [u8; 16] = self.rng.random();
        let digest = commitment_digest(&self.key.address(), &claim.solution, &salt);
        // A reveal for the voided commitment can never apply; reuse its nonce.
        let on_chain = self.view.tip_state().nonce(&self.key.address());
        let nonce = match &claim.reveal {
            Some(r) if r.nonce >= on_chain => r.nonce,
            _ => self.next_nonce(),
        };
        let tx = self.send_own_at(nonce, TxBody::SolutionCommitment { problem_id: claim.problem, digest }, out);
        self.events.push(MinerEvent::Committed { tick, problem: claim.problem, tx: tx.hash(), level: claim.solution.claimed_level });
        self.claim = Some(Claim { salt, commit: tx, reveal: None, ..claim });
    }

    fn abandon_claim(&mut self, tick: u64, out: &mut Vec<Payload>) {
        let Some(claim) = self.claim.take() else { return };
        let on_chain = self.view.tip_state().nonce(&self.key.address());
        // Neutralize our still-pending transactions so later nonces are not blocked.
        let stale: Vec<u64> = [Some(&claim.commit), claim.reveal.as_ref()]
            .into_iter()
            .flatten()
            .map(|t| t.nonce)
            .filter(|n| *n >= on_chain && self.own_sent.contains_key(n))
            .collect();
        for nonce in stale {
            let noop = TxBody::Transfer { receiver: self.key.address(), amount: Amount::ZERO };
            self.send_own_at(nonce, noop, out);
        }
        self.events.push(MinerEvent::Abandoned { tick, problem: claim.problem });
    }

    fn refresh_job(&mut self, tick: u64) {
        let Some(job) = &self.job else { return };
        let open = matches!(self.view.tip_state().problem(&job.problem).map(|e| &e.status), Some(ProblemStatus::Open));
        if !open {
            let problem = job.problem;
            self.job = None;
            self.events.push(MinerEvent::Abandoned { tick, problem });
        }
    }

    fn start_job(&mut self) {
        let choice = select_problem(self.view.tip_state(), &self.skip, self.strategy.as_mut(), &mut self.rng);
        let ProblemChoice::User(problem) = choice else { return };
        let entry = self.view.tip_state().problem(&problem).expect("candidate is live");
        let seed = u64::from_be_bytes(
            sha256_parts(&[self.key.address().as_bytes(), problem.as_bytes()]).0[..8].try_into().expect("8 bytes"),
        );
        let outcome = solve(&entry.spec, self.cfg.solve_budget, seed);
        let remaining = outcome.steps().max(1);
        self.job = Some(Job { problem, outcome, remaining });
    }

    fn finish_job(&mut self, tick: u64, out: &mut Vec<Payload>) {
        let Some(job) = &self.job else { return };
        let state = self.view.tip_state();
        let Some(entry) = state.problem(&job.problem) else {
            self.job = None;
            return;
        };
        let search_closed = state.height() + 1 >= entry.search_closes_at();
        let solution = match &job.outcome {
            SolveOutcome::Solved { assignment, .. } => {
                Some(SolutionClaim { kind: ClaimKind::Assignment(assignment.clone()), claimed_level: 1 })
            }
            SolveOutcome::BudgetExhausted { best, .. } => {
                if !search_closed {
                    // Lower-quality claims must wait for the search window; keep hashing meanwhile.
                    return;
                }
                let partial = best.as_ref().and_then(|(values, sat)| {
                    level_for(&entry.table, *sat)
                        .map(|level| SolutionClaim { kind: ClaimKind::Assignment(values.clone()), claimed_level: level })
                });
                partial.or_else(|| {
                    entry.table.not_found_level().map(|level| SolutionClaim { kind: ClaimKind::NotFound, claimed_level: level })
                })
            }
        };
        let problem = job.problem;
        let usable = solution.filter(|s| verify_solution(&entry.spec, s, &entry.table).is_ok());
        self.job = None;
        let Some(solution) = usable else {
            self.skip.insert(problem);
            self.events.push(MinerEvent::Abandoned { tick, problem });
            return;
        };
        let salt: [u8; 16] = self.rng.random();
        let digest = commitment_digest(&self.key.address(), &solution, &salt);
        let tx = self.send_own(TxBody::SolutionCommitment { problem_id: problem, digest }, out);
        self.events.push(MinerEvent::Committed { tick, problem, tx: tx.hash(), level: solution.claimed_level });
        self.claim = Some(Claim { problem, solution, salt, commit: tx, reveal: None });
    }

    /// The reveal and reward if our claim is revealed on the main chain.
    fn revealed_claim(&self) -> Option<(Hash256, Amount)> {
        let claim = self.claim.as_ref()?;
        let reveal = claim.reveal.as_ref()?;
        match self.view.tip_state().problem(&claim.problem)?.status {
            ProblemStatus::Revealed { reveal_tx, reward, revealer, .. }
                if reveal_tx == reveal.hash() && revealer == self.key.address() =>
            {
                Some((reveal_tx, reward))
            }
            _ => None,
        }
    }

    /// Candidate block on the current tip, reusing the transaction selection while the tip
    /// and mempool are unchanged.
    fn candidate(&mut self, tick: u64, problem_ref: ProblemRef, reward: Amount) -> Block {
        let state = self.view.tip_state();
        let key = (state.tip(), self.mempool.version(), reward);
        let txs = match &self.tx_cache {
            Some((k, txs)) if *k == key => txs.clone(),
            _ => {
                let block = assemble_block(
                    state,
                    &self.mempool,
                    problem_ref,
                    reward,
                    &self.key.address(),
                    tick,
                    &self.chain_cfg,
                    self.cfg.max_block_txs,
                );
                self.tx_cache = Some((key, block.txs.clone()));
                return block;
            }
        };
        Block::new(
            BlockHeader {
                parent_hash: state.tip(),
                height: state.height() + 1,
                timestamp: tick,
                miner: self.key.address(),
                problem_ref,
                problem_reward: reward,
                tx_root: Hash256::ZERO,
            },
            txs,
        )
    }

    fn try_user_block(&mut self, tick: u64, reveal_tx: Hash256, reward: Amount) -> Option<Block> {
        if tick <= self.view.tip_block().header.timestamp {
            return None;
        }
        let block = self.candidate(tick, ProblemRef::User { revealing_tx: reveal_tx }, reward);
        let cfg = &self.chain_cfg;
        pocw_check(&block.header, tick, cfg.pocw_difficulty, reward, cfg.pow_hash).passed().then_some(block)
    }

    fn try_system_block(&mut self, tick: u64, budget: u64) -> Option<Block> {
        if tick <= self.view.tip_block().header.timestamp {
            return None;
        }
        let reward = self.chain_cfg.system_reward;
        let template = self.candidate(tick, ProblemRef::System { nonce: 0 }, reward);
        let cfg = &self.chain_cfg;
        let nonce = scan_nonces(&template.header, 0, budget, cfg.system_difficulty, cfg.pow_hash)?;
        let mut header = template.header.clone();
        header.problem_ref = ProblemRef::System { nonce };
        Some(Block::new(header, template.txs))
    }

    fn update_phase(&mut self, tick: u64) {
        let phase = if let Some(claim) = &self.claim {
            if self.revealed_claim().is_some() {
                Phase::PocwTrials(claim.problem)
            } else if matches!(
                self.view.tip_state().problem(&claim.problem).map(|e| &e.status),
                Some(ProblemStatus::Committed { commit_tx, .. }) if *commit_tx == claim.commit.hash()
            ) {
                Phase::AwaitReveal(claim.problem)
            } else {
                Phase::AwaitCommitInclusion(claim.problem)
            }
        } else if let Some(job) = &self.job {
            Phase::SolvingUser(job.problem)
        } else {
            Phase::SolvingSystem
        };
        if phase != self.phase {
            self.phase = phase;
            self.events.push(MinerEvent::Phase { tick, phase });
        }
    }
}
