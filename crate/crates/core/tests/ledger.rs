use std::sync::Arc;

use crowdmine::crowdwork::{ClaimKind, Constraint, Family, ProblemSpec, QualityCriterion, RewardLevel, RewardTable, SolutionClaim};
use crowdmine::ledger::{
    block_supply_delta, commitment_digest, Address, Amount, Block, BlockHeader, ChainConfig, ChainState, Genesis, Hash256,
    Keypair, LedgerError, ProblemRef, ProblemStatus, Ratio, Transaction, TxBody,
};
use proptest::prelude::*;

fn addr(label: &str) -> Address {
    Keypair::derive(label).address()
}

fn config(k: f64) -> ChainConfig {
    ChainConfig {
        burn_ratio: Ratio::from_f64(k),
        system_reward: Amount(100),
        t_min: 2,
        t_max: 6,
        t_search_default: 3,
        verify_signatures: false,
        ..ChainConfig::default()
    }
}

fn triangle() -> ProblemSpec {
    ProblemSpec {
        family: Family::GraphColoring,
        domains: vec![vec![0, 1, 2]; 3],
        constraints: vec![Constraint::ne(0, 1), Constraint::ne(1, 2), Constraint::ne(0, 2)],
    }
}

fn table(theta1: u64, theta2: u64, floor: u64) -> RewardTable {
    RewardTable {
        levels: vec![
            RewardLevel { criterion: QualityCriterion::MinSatisfied(3), reward: Amount(theta1) },
            RewardLevel { criterion: QualityCriterion::MinSatisfied(2), reward: Amount(theta2) },
            RewardLevel { criterion: QualityCriterion::NotFound, reward: Amount(floor) },
        ],
        min_portion: Ratio::from_f64(0.1),
    }
}

/// Drives a chain with hand-built blocks; proof-of-work is not checked by `apply_block`.
struct Toy {
    cfg: ChainConfig,
    state: ChainState,
    nonces: std::collections::HashMap<Address, u64>,
}

impl Toy {
    fn new(cfg: ChainConfig, alloc: &[(Address, u64)]) -> Self {
        let g = Genesis::new(alloc.iter().map(|(a, v)| (*a, Amount(*v))).collect());
        Toy { cfg, state: ChainState::genesis(&g).unwrap(), nonces: Default::default() }
    }

    fn tx(&mut self, from: Address, fee: u64, body: TxBody) -> Arc<Transaction> {
        let n = self.nonces.entry(from).or_default();
        let tx = Transaction::unsigned(from, Amount(fee), *n, body);
        *n += 1;
        Arc::new(tx)
    }

    fn header(&self, miner: Address, problem_ref: ProblemRef, reward: u64) -> BlockHeader {
        BlockHeader {
            parent_hash: self.state.tip(),
            height: self.state.height() + 1,
            timestamp: self.state.height() + 1,
            miner,
            problem_ref,
            problem_reward: Amount(reward),
            tx_root: Hash256::ZERO,
        }
    }

    fn system(&mut self, miner: Address, txs: Vec<Arc<Transaction>>) -> Result<Block, LedgerError> {
        let h = self.header(miner, ProblemRef::System { nonce: 0 }, self.cfg.system_reward.0);
        let b = Block::new(h, txs);
        self.state = self.state.apply_block(&b, &self.cfg)?;
        Ok(b)
    }

    fn user(&mut self, miner: Address, reveal: Hash256, reward: u64) -> Result<Block, LedgerError> {
        let h = self.header(miner, ProblemRef::User { revealing_tx: reveal }, reward);
        let b = Block::new(h, vec![]);
        self.state = self.state.apply_block(&b, &self.cfg)?;
        Ok(b)
    }

    fn advance_to(&mut self, height: u64, miner: Address) {
        while self.state.height() < height {
            self.system(miner, vec![]).unwrap();
        }
    }
}

/// Proposal at height 1, commit at 2, reveal at 2 + t_min (or later when `reveal_at` says so).
fn solve_flow(toy: &mut Toy, proposer: Address, solver: Address, sys: Address, claim: SolutionClaim, t: &RewardTable, reveal_at: u64) -> Hash256 {
    let spec = triangle();
    let id = spec.problem_id();
    let p = toy.tx(proposer, 0, TxBody::ProblemProposal { spec: Arc::new(spec), reward_table: Arc::new(t.clone()), t_search: 3 });
    toy.system(sys, vec![p]).unwrap();
    let salt = [7u8; 16];
    let c = toy.tx(solver, 0, TxBody::SolutionCommitment { problem_id: id, digest: commitment_digest(&solver, &claim, &salt) });
    let commit_hash = c.hash();
    toy.system(sys, vec![c]).unwrap();
    toy.advance_to(reveal_at - 1, sys);
    let r = toy.tx(solver, 0, TxBody::SolutionRevealing { problem_id: id, commitment_ref: commit_hash, solution: claim, salt });
    let reveal_hash = r.hash();
    toy.system(sys, vec![r]).unwrap();
    reveal_hash
}

fn full_claim() -> SolutionClaim {
    SolutionClaim { kind: ClaimKind::Assignment(vec![0, 1, 2]), claimed_level: 1 }
}

#[test]
fn user_block_splits_reward_between_miner_and_burn() {
    let (p, s, m) = (addr("p"), addr("s"), addr("m"));
    let mut toy = Toy::new(config(0.05), &[(p, 1000)]);
    let t = table(100, 40, 10);
    let reveal = solve_flow(&mut toy, p, s, m, full_claim(), &t, 4);
    let burned = toy.state.burned();
    toy.user(s, reveal, 100).unwrap();
    assert_eq!(toy.state.balance(&s), Amount(95));
    assert_eq!(toy.state.burned().0 - burned.0, 5);
    assert_eq!(toy.state.balance(&p), Amount(900));
    assert_eq!(toy.state.locked_total(), Amount(0));
    assert_eq!(toy.state.conservation_gap(), 0);
}

#[test]
fn system_block_mints_miner_share_without_burn() {
    let m = addr("m");
    let mut toy = Toy::new(config(0.05), &[]);
    let b = toy.system(m, vec![]).unwrap();
    assert_eq!(toy.state.minted(), Amount(95));
    assert_eq!(toy.state.burned(), Amount(0));
    assert_eq!(toy.state.balance(&m), Amount(95));
    assert_eq!(block_supply_delta(&b, Ratio::from_f64(0.05)), 95);
}

#[test]
fn level_two_settlement_on_three_account_ledger() {
    // Proposer P starts with 1000, solver S and system miner M with nothing.
    // Hand execution with k = 0.05, theta1 = 100, theta2 = 40, t_search = 3:
    //   h1 proposal locks 100 (P = 900); h2 commit; level 2 is admissible from h5 on.
    //   h5 reveal; h6 S's user block pays 40 - ceil(2) = 38 and refunds 60 to P.
    //   M mines h1..h5 as system blocks: 5 * 95 = 475 minted.
    let (p, s, m) = (addr("p"), addr("s"), addr("m"));
    let mut toy = Toy::new(config(0.05), &[(p, 1000)]);
    let claim = SolutionClaim { kind: ClaimKind::Assignment(vec![0, 0, 1]), claimed_level: 2 };
    let reveal = solve_flow(&mut toy, p, s, m, claim, &table(100, 40, 10), 5);
    toy.user(s, reveal, 40).unwrap();
    let st = &toy.state;
    assert_eq!(st.balance(&p), Amount(960));
    assert_eq!(st.balance(&s), Amount(38));
    assert_eq!(st.balance(&m), Amount(475));
    assert_eq!(st.locked_total(), Amount(0));
    assert_eq!((st.minted(), st.burned()), (Amount(475), Amount(2)));
    assert_eq!(st.total_supply(), 1000 + 475 - 2);
    assert_eq!(st.conservation_gap(), 0);
    let id = triangle().problem_id();
    assert!(matches!(st.problem(&id).unwrap().status, ProblemStatus::Settled { level: 2, .. }));
}

#[test]
fn level_two_rejected_before_search_window_closes() {
    let (p, s, m) = (addr("p"), addr("s"), addr("m"));
    let mut toy = Toy::new(config(0.05), &[(p, 1000)]);
    let spec = triangle();
    let id = spec.problem_id();
    let prop = toy.tx(p, 0, TxBody::ProblemProposal { spec: Arc::new(spec), reward_table: Arc::new(table(100, 40, 10)), t_search: 3 });
    toy.system(m, vec![prop]).unwrap();
    let claim = SolutionClaim { kind: ClaimKind::Assignment(vec![0, 0, 1]), claimed_level: 2 };
    let salt = [1u8; 16];
    let c = toy.tx(s, 0, TxBody::SolutionCommitment { problem_id: id, digest: commitment_digest(&s, &claim, &salt) });
    let ch = c.hash();
    toy.system(m, vec![c]).unwrap();
    toy.advance_to(3, m);
    let r = toy.tx(s, 0, TxBody::SolutionRevealing { problem_id: id, commitment_ref: ch, solution: claim, salt });
    let err = toy.system(m, vec![r]).unwrap_err();
    assert!(matches!(err, LedgerError::StaleQualityBeforeTimeout { level: 2, open_at: 5 }));
}

#[test]
fn reveal_outside_window_rejected() {
    let (p, s, m) = (addr("p"), addr("s"), addr("m"));
    for reveal_height in [3u64, 9] {
        let mut toy = Toy::new(config(0.05), &[(p, 1000)]);
        let spec = triangle();
        let id = spec.problem_id();
        let prop = toy.tx(p, 0, TxBody::ProblemProposal { spec: Arc::new(spec), reward_table: Arc::new(table(100, 40, 10)), t_search: 3 });
        toy.system(m, vec![prop]).unwrap();
        let salt = [1u8; 16];
        let c = toy.tx(s, 0, TxBody::SolutionCommitment { problem_id: id, digest: commitment_digest(&s, &full_claim(), &salt) });
        let ch = c.hash();
        toy.system(m, vec![c]).unwrap();
        toy.advance_to(reveal_height - 1, m);
        let r = toy.tx(s, 0, TxBody::SolutionRevealing { problem_id: id, commitment_ref: ch, solution: full_claim(), salt });
        let before = toy.state.clone();
        let err = toy.system(m, vec![r]).unwrap_err();
        // At height 9 the commitment (h2, t_max 6) already lapsed at h9's parent, so it is gone.
        assert!(matches!(err, LedgerError::RevealOutOfWindow { .. } | LedgerError::CommitmentMismatch), "{err}");
        assert_eq!(toy.state, before, "a failed block leaves the state untouched");
    }
}

#[test]
fn unsolved_proposal_refunded_after_search_and_expire_horizon() {
    let (p, m) = (addr("p"), addr("m"));
    let cfg = ChainConfig { t_expire: Some(30), t_max: 15, ..config(0.05) };
    let mut toy = Toy::new(cfg, &[(p, 1000)]);
    toy.advance_to(9, m);
    let spec = triangle();
    let id = spec.problem_id();
    let prop = toy.tx(p, 0, TxBody::ProblemProposal { spec: Arc::new(spec), reward_table: Arc::new(table(100, 40, 10)), t_search: 20 });
    toy.system(m, vec![prop]).unwrap();
    assert_eq!(toy.state.problem(&id).unwrap().proposal_height, 10);
    toy.advance_to(60, m);
    assert_eq!(toy.state.balance(&p), Amount(900));
    assert!(matches!(toy.state.problem(&id).unwrap().status, ProblemStatus::Open));
    toy.advance_to(61, m);
    assert_eq!(toy.state.balance(&p), Amount(1000));
    assert!(matches!(toy.state.problem(&id).unwrap().status, ProblemStatus::Expired { height: 61 }));
    let again = toy.state.settle_expiry(61, &toy.cfg);
    assert_eq!(again, toy.state, "expiry is idempotent per height");
}

#[test]
fn lapsed_commitment_reopens_problem() {
    let (p, s, m) = (addr("p"), addr("s"), addr("m"));
    let cfg = ChainConfig { t_max: 15, t_min: 3, ..config(0.05) };
    let mut toy = Toy::new(cfg, &[(p, 1000)]);
    let spec = triangle();
    let id = spec.problem_id();
    toy.advance_to(3, m);
    let prop = toy.tx(p, 0, TxBody::ProblemProposal { spec: Arc::new(spec), reward_table: Arc::new(table(100, 40, 10)), t_search: 100 });
    toy.system(m, vec![prop]).unwrap();
    let c = toy.tx(s, 0, TxBody::SolutionCommitment { problem_id: id, digest: Hash256([3; 32]) });
    toy.system(m, vec![c]).unwrap();
    assert!(matches!(toy.state.problem(&id).unwrap().status, ProblemStatus::Committed { height: 5, .. }));
    toy.advance_to(20, m);
    assert!(matches!(toy.state.problem(&id).unwrap().status, ProblemStatus::Committed { .. }));
    toy.advance_to(21, m);
    assert!(matches!(toy.state.problem(&id).unwrap().status, ProblemStatus::Open));
}

#[test]
fn reveal_at_lower_window_edge_is_not_expired() {
    let (p, s, m) = (addr("p"), addr("s"), addr("m"));
    let mut toy = Toy::new(config(0.05), &[(p, 1000)]);
    let t = table(100, 40, 10);
    let at = 2 + toy.cfg.t_min;
    solve_flow(&mut toy, p, s, m, full_claim(), &t, at);
    toy.advance_to(30, m);
    let id = triangle().problem_id();
    assert!(matches!(toy.state.problem(&id).unwrap().status, ProblemStatus::Revealed { .. }));
    assert_eq!(toy.state.locked_total(), Amount(100));
}

#[test]
fn fee_above_amount_rejected() {
    let (a, b, m) = (addr("a"), addr("b"), addr("m"));
    let mut toy = Toy::new(config(0.05), &[(a, 1000)]);
    let tx = toy.tx(a, 5, TxBody::Transfer { receiver: b, amount: Amount(4) });
    assert!(matches!(toy.system(m, vec![tx]), Err(LedgerError::FeeExceedsAmount { .. })));
}

#[derive(Clone, Debug)]
enum Op {
    Transfer { from: usize, to: usize, amount: u64, fee_pct: u64 },
    Propose { from: usize, reward: u64 },
    Empty,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..4usize, 0..4usize, 0..400u64, 0..=100u64).prop_map(|(from, to, amount, fee_pct)| Op::Transfer { from, to, amount, fee_pct }),
        (0..4usize, 10..500u64).prop_map(|(from, reward)| Op::Propose { from, reward }),
        Just(Op::Empty),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Random blocks of transfers and proposals, some failing, interleaved with a full
    /// solve flow: conservation holds after every block and replay is bit-identical.
    #[test]
    fn conservation_and_replay(k_ppm in 0u32..900_000, ops in prop::collection::vec(prop::collection::vec(op(), 0..4), 1..25), seed in any::<u64>()) {
        let users: Vec<Address> = (0..4).map(|i| addr(&format!("u{i}"))).collect();
        let m = addr("m");
        let cfg = ChainConfig { burn_ratio: Ratio::from_ppm(k_ppm), ..config(0.0) };
        let alloc: Vec<(Address, u64)> = users.iter().map(|u| (*u, 2_000)).collect();
        let mut toy = Toy::new(cfg.clone(), &alloc);
        let mut applied = Vec::new();
        let mut problem_seed = seed;
        for block_ops in ops {
            let mut txs = Vec::new();
            let mut nonces = toy.nonces.clone();
            for o in block_ops {
                let body_from = match o {
                    Op::Transfer { from, to, amount, fee_pct } => {
                        Some((users[from], amount * fee_pct / 100, TxBody::Transfer { receiver: users[to], amount: Amount(amount) }))
                    }
                    Op::Propose { from, reward } => {
                        problem_seed = problem_seed.wrapping_add(1);
                        let mut spec = triangle();
                        spec.domains[0].push(3 + (problem_seed % 1000) as i64);
                        let t = table(reward, reward / 2, reward.div_ceil(10));
                        Some((users[from], 0, TxBody::ProblemProposal { spec: Arc::new(spec), reward_table: Arc::new(t), t_search: 2 }))
                    }
                    Op::Empty => None,
                };
                if let Some((from, fee, body)) = body_from {
                    txs.push(toy.tx(from, fee, body));
                }
            }
            let before = toy.state.clone();
            match toy.system(m, txs) {
                Ok(b) => {
                    prop_assert_eq!(toy.state.total_supply() - before.total_supply(), block_supply_delta(&b, cfg.burn_ratio));
                    applied.push(b);
                }
                Err(_) => {
                    prop_assert_eq!(&toy.state, &before);
                    toy.nonces = nonces.drain().collect();
                }
            }
            prop_assert_eq!(toy.state.conservation_gap(), 0);
        }
        let mut replayed = ChainState::genesis(&Genesis::new(alloc.iter().map(|(a, v)| (*a, Amount(*v))).collect())).unwrap();
        for b in &applied {
            replayed = replayed.apply_block(b, &cfg).unwrap();
        }
        prop_assert_eq!(replayed.digest(), toy.state.digest());
    }

    /// Full solve flow at arbitrary k and reward: the user block's delta is exactly -ceil(kR).
    #[test]
    fn user_block_delta_is_exact(k_ppm in 0u32..999_999, theta1 in 20u64..100_000) {
        let (p, s, m) = (addr("p"), addr("s"), addr("m"));
        let cfg = ChainConfig { burn_ratio: Ratio::from_ppm(k_ppm), max_reward: Amount(1_000_000), ..config(0.0) };
        let mut toy = Toy::new(cfg.clone(), &[(p, 1_000_000)]);
        let t = table(theta1, theta1 / 2, theta1.div_ceil(10));
        let reveal = solve_flow(&mut toy, p, s, m, full_claim(), &t, 4);
        let before = toy.state.total_supply();
        let b = toy.user(s, reveal, theta1).unwrap();
        let burn = (theta1 as u128 * k_ppm as u128).div_ceil(1_000_000) as i128;
        prop_assert_eq!(toy.state.total_supply() - before, -burn);
        prop_assert_eq!(block_supply_delta(&b, cfg.burn_ratio), -burn);
        prop_assert_eq!(toy.state.balance(&s).0 as i128, theta1 as i128 - burn);
        prop_assert_eq!(toy.state.conservation_gap(), 0);
    }
}
