//! Hand-built chains for the double-spend and fee-grab attacks.
//!
//! Blocks are produced directly (nonce and timestamp search) and submitted to an honest
//! [`ChainView`], so every attacker block goes through the same validation as in the network
//! simulator. Each attack is paired with a counterfactual chain in which the attacker stays
//! honest; the realized payoff is the difference in the attacker's final balance.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::analytic::{analytic_double_spend_payoff, analytic_fee_grab_payoff};
use super::{AttackError, AttackOutcome};
use crate::consensus::{pocw_check, scan_nonces, ChainView, Rejection};
use crate::crowdwork::{generate_instance, ClaimKind, ProblemSpec, RewardTable, SizeParams, SolutionClaim};
use crate::ledger::{
    commitment_digest, Address, Amount, Block, BlockHeader, ChainConfig, ChainState, Difficulty, Genesis, Hash256,
    Keypair, ProblemRef, Ratio, Transaction, TxBody,
};

const SEARCH_CAP: u64 = 1 << 30;

/// An honest observer plus helpers that mine blocks on arbitrary parents.
pub struct ScriptedChain {
    cfg: Arc<ChainConfig>,
    view: ChainView,
}

impl ScriptedChain {
    pub fn new(cfg: Arc<ChainConfig>, genesis: &Genesis) -> Result<Self, AttackError> {
        let view = ChainView::new(cfg.clone(), genesis).map_err(|e| AttackError::Setup(e.to_string()))?;
        Ok(ScriptedChain { cfg, view })
    }

    pub fn view(&self) -> &ChainView {
        &self.view
    }

    pub fn tip(&self) -> Hash256 {
        self.view.tip()
    }

    pub fn state(&self, at: &Hash256) -> ChainState {
        self.view.state_at(at).expect("block is known")
    }

    fn header(&self, parent: &Hash256, miner: &Address, problem_ref: ProblemRef, reward: Amount) -> BlockHeader {
        let p = &self.view.tree().block(parent).expect("parent is known").header;
        BlockHeader {
            parent_hash: *parent,
            height: p.height + 1,
            timestamp: p.timestamp + 1,
            miner: *miner,
            problem_ref,
            problem_reward: reward,
            tx_root: Hash256::ZERO,
        }
    }

    /// Solves the system puzzle on top of `parent`.
    pub fn system_block(&self, parent: &Hash256, miner: &Address, txs: Vec<Arc<Transaction>>) -> Block {
        let header = self.header(parent, miner, ProblemRef::System { nonce: 0 }, self.cfg.system_reward);
        let block = Block::new(header, txs);
        let nonce = scan_nonces(&block.header, 0, SEARCH_CAP, self.cfg.system_difficulty, self.cfg.pow_hash)
            .expect("system puzzle solvable within the search cap");
        let mut header = block.header.clone();
        header.problem_ref = ProblemRef::System { nonce };
        Block::new(header, block.txs)
    }

    /// Searches timestamps until the PoCW condition holds for `reward`.
    pub fn user_block(
        &self,
        parent: &Hash256,
        miner: &Address,
        reveal_tx: Hash256,
        reward: Amount,
        txs: Vec<Arc<Transaction>>,
    ) -> Block {
        let mut block = Block::new(self.header(parent, miner, ProblemRef::User { revealing_tx: reveal_tx }, reward), txs);
        let start = block.header.timestamp;
        for ts in start..start + SEARCH_CAP {
            if pocw_check(&block.header, ts, self.cfg.pocw_difficulty, reward, self.cfg.pow_hash).passed() {
                let mut header = block.header.clone();
                header.timestamp = ts;
                block = Block::new(header, block.txs);
                return block;
            }
        }
        panic!("PoCW condition not met within the search cap");
    }

    /// Validates and inserts; returns the block hash or the honest node's rejection.
    pub fn submit(&mut self, block: Block) -> Result<Hash256, Rejection> {
        let hash = block.hash();
        let update = self.view.receive(Arc::new(block), None);
        match update.rejected.into_iter().next() {
            Some((_, r)) => Err(r),
            None => Ok(hash),
        }
    }

    /// Mines and submits a system block on the current tip.
    pub fn extend_system(&mut self, miner: &Address, txs: Vec<Arc<Transaction>>) -> Hash256 {
        let block = self.system_block(&self.tip(), miner, txs);
        self.submit(block).expect("honest block is valid")
    }
}

/// A signing account with a local nonce counter.
pub struct Account {
    pub key: Keypair,
    pub nonce: u64,
}

impl Account {
    pub fn new(label: &str) -> Self {
        Account { key: Keypair::derive(label), nonce: 0 }
    }

    pub fn address(&self) -> Address {
        self.key.address()
    }

    pub fn send(&mut self, fee: Amount, body: TxBody) -> Arc<Transaction> {
        let tx = Transaction::signed(&self.key, fee, self.nonce, body);
        self.nonce += 1;
        Arc::new(tx)
    }

    pub fn transfer(&mut self, to: Address, amount: Amount, fee: Amount) -> Arc<Transaction> {
        self.send(fee, TxBody::Transfer { receiver: to, amount })
    }
}

/// A problem whose solution the proposer already knows.
#[derive(Clone, Debug)]
pub struct PlantedProblem {
    pub spec: Arc<ProblemSpec>,
    pub table: Arc<RewardTable>,
    pub claim: SolutionClaim,
}

impl PlantedProblem {
    pub fn new(seed: u64, reward: Amount, min_portion: Ratio) -> Self {
        let params = SizeParams::GraphColoring { vertices: 12, colors: 3, avg_degree: 2.0 };
        let inst = generate_instance(params, seed).expect("small coloring instance");
        let table = inst.spec.tiered_table(reward, Ratio::from_f64(0.5), min_portion);
        PlantedProblem {
            spec: Arc::new(inst.spec),
            table: Arc::new(table),
            claim: SolutionClaim { kind: ClaimKind::Assignment(inst.planted), claimed_level: 1 },
        }
    }

    pub fn id(&self) -> Hash256 {
        self.spec.problem_id()
    }

    pub fn proposal(&self, t_search: u64) -> TxBody {
        TxBody::ProblemProposal { spec: self.spec.clone(), reward_table: self.table.clone(), t_search }
    }

    pub fn commitment(&self, solver: &Address, salt: [u8; 16]) -> TxBody {
        TxBody::SolutionCommitment { problem_id: self.id(), digest: commitment_digest(solver, &self.claim, &salt) }
    }

    pub fn reveal(&self, commit_tx: Hash256, salt: [u8; 16]) -> TxBody {
        TxBody::SolutionRevealing { problem_id: self.id(), commitment_ref: commit_tx, solution: self.claim.clone(), salt }
    }
}

/// Chain parameters for scripted attacks: burn ratio `k`, PoCW tuned so a block for `r_ref`
/// passes about once per hundred timestamps, and a cheap system puzzle paying `r_ref`.
pub fn scripted_config(k: Ratio, r_ref: Amount, max_reward: Amount) -> ChainConfig {
    ChainConfig {
        burn_ratio: k,
        pocw_difficulty: Difficulty::from_probability(0.01 / r_ref.0 as f64),
        system_difficulty: Difficulty::from_probability(1.0 / 16.0),
        system_reward: r_ref,
        t_min: 2,
        t_max: 10,
        max_reward,
        ..ChainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleSpendParams {
    pub k: Ratio,
    /// Value of the transfer the attacker wants to revert.
    pub v_tx: Amount,
    /// Reward of the honest block carrying the target transfer.
    pub r_problem: Amount,
    /// Reward of the attacker's self-made problem.
    pub r_attacker: Amount,
    /// Amount of the conflicting self-transfer in the attacker block (0 keeps its volume at 0).
    pub conflict_amount: Amount,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeeGrabParams {
    pub k: Ratio,
    pub r_attacker: Amount,
    /// `(amount, fee)` of each transfer the attacker packs into its block.
    pub transfers: Vec<(Amount, Amount)>,
    pub seed: u64,
}

fn salt(seed: u64, tag: u8) -> [u8; 16] {
    let mut s = [tag; 16];
    s[..8].copy_from_slice(&seed.to_be_bytes());
    s
}

/// Proposal, commitment and reveal for each `(proposer, problem, solver)` job (indices into
/// `accounts`), spread over honest system blocks mined by `miner`. Returns the reveal hashes.
fn run_problems(
    chain: &mut ScriptedChain,
    miner: &Address,
    accounts: &mut [Account],
    jobs: &[(usize, &PlantedProblem, usize)],
    seed: u64,
) -> Vec<Hash256> {
    let cfg = chain.cfg.clone();
    let proposals =
        jobs.iter().map(|(prop, p, _)| accounts[*prop].send(Amount::ZERO, p.proposal(cfg.t_search_default))).collect();
    chain.extend_system(miner, proposals);
    let commits: Vec<_> = jobs
        .iter()
        .enumerate()
        .map(|(i, (_, p, solver))| {
            let addr = accounts[*solver].address();
            accounts[*solver].send(Amount::ZERO, p.commitment(&addr, salt(seed, i as u8)))
        })
        .collect();
    chain.extend_system(miner, commits.clone());
    for _ in 1..cfg.t_min {
        chain.extend_system(miner, Vec::new());
    }
    let reveals: Vec<_> = jobs
        .iter()
        .enumerate()
        .map(|(i, (_, p, solver))| accounts[*solver].send(Amount::ZERO, p.reveal(commits[i].hash(), salt(seed, i as u8))))
        .collect();
    let hashes = reveals.iter().map(|t| t.hash()).collect();
    chain.extend_system(miner, reveals);
    hashes
}

/// Reverts a confirmed transfer by out-valuing its block with a block for a self-made problem.
pub fn run_double_spend(p: &DoubleSpendParams) -> Result<AttackOutcome, AttackError> {
    if p.r_attacker.0 == 0 || p.r_problem.0 == 0 {
        return Err(AttackError::Inconsistent("rewards must be positive".into()));
    }
    if !p.k.strictly_exceeds(p.v_tx, p.r_problem) {
        return Err(AttackError::Inconsistent("target transfer cannot fit in the victim block".into()));
    }
    let max_reward = Amount(p.r_problem.0.max(p.r_attacker.0));
    let cfg = Arc::new(scripted_config(p.k, Amount(p.r_problem.0.min(p.r_attacker.0)), max_reward));
    cfg.validate().map_err(|e| AttackError::Setup(e.to_string()))?;

    let fund = |a: &Account, v: u64| (a.address(), Amount(v));
    let attacker_funds = p.r_attacker.0 + p.v_tx.0 + 1_000;
    let proposer_funds = p.r_problem.0 + 1_000;
    let new_accounts = || vec![Account::new("ds-attacker"), Account::new("ds-proposer"), Account::new("ds-honest")];
    let (attacker, proposer, honest) = (0, 1, 2);
    let merchant = Keypair::derive("ds-merchant").address();
    let accts = new_accounts();
    let genesis = Genesis::new(vec![
        fund(&accts[attacker], attacker_funds),
        fund(&accts[proposer], proposer_funds),
        fund(&accts[honest], 0),
    ]);
    let miner = accts[honest].address();
    let honest_problem = PlantedProblem::new(p.seed, p.r_problem, cfg.min_portion);
    let attacker_problem = PlantedProblem::new(p.seed ^ 0xa77a_c4e5, p.r_attacker, cfg.min_portion);

    // Counterfactual: the attacker only pays the merchant.
    let mut accts = new_accounts();
    let mut cf = ScriptedChain::new(cfg.clone(), &genesis)?;
    let reveal = run_problems(&mut cf, &miner, &mut accts, &[(proposer, &honest_problem, honest)], p.seed)[0];
    let pay = accts[attacker].transfer(merchant, p.v_tx, Amount::ZERO);
    let victim = cf.user_block(&cf.tip(), &miner, reveal, p.r_problem, vec![pay]);
    cf.submit(victim).expect("honest victim block is valid");
    let cf_balance = cf.view().tip_state().balance(&accts[attacker].address());

    // Attack: the attacker prepares its own problem alongside the honest one.
    let mut accts = new_accounts();
    let mut chain = ScriptedChain::new(cfg.clone(), &genesis)?;
    let jobs = [(proposer, &honest_problem, honest), (attacker, &attacker_problem, attacker)];
    let reveals = run_problems(&mut chain, &miner, &mut accts, &jobs, p.seed);
    let a = &mut accts[attacker];
    let fork_parent = chain.tip();
    let start_ts = chain.view().tip_block().header.timestamp;
    let pay = a.transfer(merchant, p.v_tx, Amount::ZERO);
    let victim_block = chain.user_block(&fork_parent, &miner, reveals[0], p.r_problem, vec![pay.clone()]);
    let victim_volume = victim_block.volume().map_err(|e| AttackError::Setup(e.to_string()))?;
    let victim = chain.submit(victim_block).expect("honest victim block is valid");

    // Same nonce as the payment, so the payment can never be re-included.
    a.nonce = pay.nonce;
    let conflict = a.transfer(a.address(), p.conflict_amount, Amount::ZERO);
    let attack_block = chain.user_block(&fork_parent, &a.address(), reveals[1], p.r_attacker, vec![conflict]);
    let end_ts = attack_block.header.timestamp;
    let verdict = chain.submit(attack_block);
    let analytic = analytic_double_spend_payoff(p.v_tx, victim_volume, p.r_problem, p.r_attacker, p.k).ok();
    let balance = chain.view().tip_state().balance(&a.address());
    Ok(AttackOutcome {
        succeeded: verdict.is_ok() && !chain.view().is_on_main(&victim),
        validated: verdict.is_ok(),
        rejection: verdict.err().map(|r| r.kind().to_string()),
        realized_payoff: balance.0 as i128 - cf_balance.0 as i128,
        analytic_payoff: analytic,
        ticks: end_ts - start_ts,
    })
}

/// Collects transfer fees in a block for a self-made problem.
pub fn run_fee_grab(p: &FeeGrabParams) -> Result<AttackOutcome, AttackError> {
    if p.r_attacker.0 == 0 {
        return Err(AttackError::Inconsistent("attacker reward must be positive".into()));
    }
    if p.transfers.iter().any(|(amount, fee)| fee > amount) {
        return Err(AttackError::Inconsistent("fees cannot exceed amounts".into()));
    }
    let cfg = Arc::new(scripted_config(p.k, p.r_attacker, p.r_attacker));
    cfg.validate().map_err(|e| AttackError::Setup(e.to_string()))?;
    let volume: u64 = p.transfers.iter().map(|(a, _)| a.0).sum();
    let fees: u64 = p.transfers.iter().map(|(_, f)| f.0).sum();
    let new_accounts = || vec![Account::new("fg-attacker"), Account::new("fg-user")];
    let (attacker, user) = (0, 1);
    let mut accts = new_accounts();
    let genesis = Genesis::new(vec![
        (accts[attacker].address(), Amount(p.r_attacker.0 + 1_000)),
        (accts[user].address(), Amount(volume + fees + 1_000)),
    ]);
    let problem = PlantedProblem::new(p.seed, p.r_attacker, cfg.min_portion);
    let receiver = Keypair::derive("fg-receiver").address();
    let miner = Keypair::derive("fg-honest").address();

    // Counterfactual: the attacker stays idle while honest blocks advance.
    let mut cf = ScriptedChain::new(cfg.clone(), &genesis)?;
    for _ in 0..cfg.t_min + 2 {
        cf.extend_system(&miner, Vec::new());
    }
    let cf_balance = cf.view().tip_state().balance(&accts[attacker].address());

    let mut chain = ScriptedChain::new(cfg.clone(), &genesis)?;
    let reveal = run_problems(&mut chain, &miner, &mut accts, &[(attacker, &problem, attacker)], p.seed)[0];
    let start_ts = chain.view().tip_block().header.timestamp;
    let txs: Vec<_> = p.transfers.iter().map(|(amount, fee)| accts[user].transfer(receiver, *amount, *fee)).collect();
    let a = &accts[attacker];
    let block = chain.user_block(&chain.tip(), &a.address(), reveal, p.r_attacker, txs);
    let end_ts = block.header.timestamp;
    let verdict = chain.submit(block);
    let analytic = analytic_fee_grab_payoff(Amount(fees), Amount(volume), p.r_attacker, p.k).ok();
    let balance = chain.view().tip_state().balance(&a.address());
    Ok(AttackOutcome {
        succeeded: verdict.is_ok(),
        validated: verdict.is_ok(),
        rejection: verdict.err().map(|r| r.kind().to_string()),
        realized_payoff: balance.0 as i128 - cf_balance.0 as i128,
        analytic_payoff: analytic,
        ticks: end_ts - start_ts,
    })
}
