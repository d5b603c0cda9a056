use std::sync::Arc;

use crowdmine::crowdwork::{generate_instance, solve, Family, Preset, SizeParams, SolveOutcome};
use crowdmine::crowdwork::quality::exhaustive_best;
use crowdmine::ledger::{
    Amount, ChainConfig, Difficulty, Genesis, Keypair, ProblemStatus, Ratio, Transaction, TxBody,
};
use crowdmine::miner::{Miner, MinerConfig, MinerEvent};
use crowdmine::netsim::{Envelope, Payload};

fn chain_cfg() -> ChainConfig {
    ChainConfig {
        system_reward: Amount(1_000),
        system_difficulty: Difficulty::pow2(248),
        pocw_difficulty: Difficulty::for_reward(0.2, Amount(1_000)),
        t_min: 2,
        t_max: 10,
        t_search_default: 5,
        verify_signatures: false,
        ..ChainConfig::default()
    }
}

fn proposer() -> Keypair {
    Keypair::derive("proposer")
}

fn genesis() -> Genesis {
    Genesis::new(vec![(proposer().address(), Amount(10_000_000))])
}

fn miner(id: usize, cfg: &Arc<ChainConfig>, mc: MinerConfig) -> Miner {
    Miner::new(id, Keypair::derive(&format!("m{id}")), mc, cfg.clone(), &genesis(), 40 + id as u64)
}

fn proposals(n: u64, family: Family, t_search: u64) -> Vec<Arc<Transaction>> {
    let p = proposer();
    (0..n)
        .map(|i| {
            let inst = generate_instance(Preset::Sim.params(family).unwrap(), 1000 + i).unwrap();
            let table = inst.spec.tiered_table(Amount(1_000), Ratio::from_f64(0.5), Ratio::from_f64(0.1));
            let body = TxBody::ProblemProposal { spec: Arc::new(inst.spec), reward_table: Arc::new(table), t_search };
            Arc::new(Transaction::unsigned(p.address(), Amount(0), i, body))
        })
        .collect()
}

/// Runs miners fully connected with one tick of latency.
fn run(miners: &mut [Miner], ticks: std::ops::Range<u64>) -> Vec<(usize, MinerEvent)> {
    let mut pending: Vec<Vec<Envelope>> = vec![Vec::new(); miners.len()];
    let mut events = Vec::new();
    for t in ticks {
        let mut next: Vec<Vec<Envelope>> = vec![Vec::new(); miners.len()];
        for (i, m) in miners.iter_mut().enumerate() {
            let out = m.step(t, std::mem::take(&mut pending[i]));
            for payload in out {
                for (j, slot) in next.iter_mut().enumerate() {
                    if j != i {
                        slot.push(Envelope { from: i, payload: payload.clone() });
                    }
                }
            }
            events.extend(m.drain_events().into_iter().map(|e| (i, e)));
        }
        pending = next;
    }
    events
}

#[test]
fn system_block_intervals_follow_the_geometric_law() {
    // Per hash success 2^-8, 64 hashes a tick: per-tick success q = 1 - (1 - 2^-8)^64.
    let cfg = Arc::new(chain_cfg());
    let mc = MinerConfig { power: 64, solve_user_problems: false, ..MinerConfig::default() };
    let mut m = miner(0, &cfg, mc);
    let mut t = 1;
    while m.view().height() < 500 {
        m.step(t, vec![]);
        t += 1;
    }
    let ts: Vec<u64> = m.view().main_blocks().map(|b| b.header.timestamp).collect();
    let gaps: Vec<f64> = std::iter::once(ts[0]).chain(ts.windows(2).map(|w| w[1] - w[0])).map(|g| g as f64).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let q = 1.0 - (1.0 - 1.0f64 / 256.0).powi(64);
    let expected = 1.0 / q;
    assert!((mean - expected).abs() <= 0.15 * expected, "mean gap {mean}, geometric mean {expected}");
    assert!(gaps.iter().all(|&g| g >= 1.0));
}

#[test]
fn step_counters_add_up_to_power_times_ticks() {
    let cfg = Arc::new(chain_cfg());
    let mut miners: Vec<Miner> = (0..3).map(|i| miner(i, &cfg, MinerConfig { power: 50 + i as u64, ..MinerConfig::default() })).collect();
    for tx in proposals(6, Family::ZeroOneProgramming, 5) {
        for m in &mut miners {
            m.deliver(Payload::Tx(tx.clone()), 0);
        }
    }
    run(&mut miners, 1..801);
    let mut sum = crowdmine::miner::StepCounters::default();
    for m in &miners {
        let c = m.counters();
        assert_eq!(c.total(), m.config().power * 800);
        assert!(c.system > 0, "{c:?}");
        sum.add(&c);
    }
    assert!(sum.user > 0 && sum.pocw > 0, "{sum:?}");
}

#[test]
fn reveals_land_inside_the_window_and_problems_settle() {
    let cfg = Arc::new(chain_cfg());
    let mut m = miner(0, &cfg, MinerConfig::default());
    for tx in proposals(5, Family::GraphColoring, 200) {
        m.deliver(Payload::Tx(tx), 0);
    }
    let events = run(std::slice::from_mut(&mut m), 1..3001);
    let state = m.view().tip_state();
    let mut settled = 0;
    for b in m.view().main_blocks() {
        for tx in &b.txs {
            if let TxBody::SolutionRevealing { commitment_ref, .. } = &tx.body {
                let commit_height = m
                    .view()
                    .main_blocks()
                    .find(|c| c.txs.iter().any(|t| t.hash() == *commitment_ref))
                    .expect("commitment on chain")
                    .header
                    .height;
                let d = b.header.height - commit_height;
                assert!((cfg.t_min..=cfg.t_max).contains(&d), "reveal {d} blocks after commit");
            }
        }
    }
    for tx in proposals(5, Family::GraphColoring, 200) {
        if let TxBody::ProblemProposal { spec, .. } = &tx.body {
            if matches!(state.problem(&spec.problem_id()).unwrap().status, ProblemStatus::Settled { .. }) {
                settled += 1;
            }
        }
    }
    assert_eq!(settled, 5);
    let user_blocks = events.iter().filter(|(_, e)| matches!(e, MinerEvent::Mined { user: true, .. })).count();
    assert_eq!(user_blocks, 5);
    assert!(m.view().height() >= 100, "height {}", m.view().height());
    assert_eq!(state.conservation_gap(), 0);
}

#[test]
fn isolated_miner_reorgs_onto_heavier_chain_and_keeps_transactions() {
    let cfg = Arc::new(chain_cfg());
    let slow = MinerConfig { power: 8, solve_user_problems: false, ..MinerConfig::default() };
    let fast = MinerConfig { power: 256, solve_user_problems: false, ..MinerConfig::default() };
    let mut a = miner(0, &cfg, fast);
    let mut b = miner(1, &cfg, slow);
    let p = proposer();
    let transfer = Arc::new(Transaction::unsigned(p.address(), Amount(0), 0, TxBody::Transfer { receiver: b.address(), amount: Amount(10) }));
    b.deliver(Payload::Tx(transfer.clone()), 0);
    let mut t = 1;
    let mut a_blocks = Vec::new();
    while b.view().tip_state().nonce(&p.address()) == 0 {
        a_blocks.extend(a.step(t, vec![]));
        b.step(t, vec![]);
        t += 1;
    }
    assert!(b.view().tip_state().balance(&b.address()) > Amount(0));
    while a.view().height() <= b.view().height() {
        a_blocks.extend(a.step(t, vec![]));
        t += 1;
    }
    let inbox: Vec<Envelope> = a_blocks.into_iter().map(|payload| Envelope { from: 0, payload }).collect();
    b.step(t, inbox);
    let events = b.drain_events();
    assert!(events.iter().any(|e| matches!(e, MinerEvent::Reorg { .. })));
    assert_eq!(b.view().tip(), a.view().tip());
    assert_eq!(b.view().tip_state().digest(), a.view().tip_state().digest());
    assert!(b.mempool().contains(&transfer.hash()), "orphaned transfer returns to the pool");
    let mut t2 = t + 1;
    while b.view().tip_state().nonce(&p.address()) == 0 {
        b.step(t2, vec![]);
        t2 += 1;
    }
    assert_eq!(b.view().tip_state().conservation_gap(), 0);
}

#[test]
fn two_miners_drop_problems_claimed_by_the_other() {
    let cfg = Arc::new(chain_cfg());
    let mut miners: Vec<Miner> = (0..2).map(|i| miner(i, &cfg, MinerConfig { power: 64, ..MinerConfig::default() })).collect();
    let txs = proposals(4, Family::Sudoku, 100);
    for tx in &txs {
        for m in &mut miners {
            m.deliver(Payload::Tx(tx.clone()), 0);
        }
    }
    let events = run(&mut miners, 1..4001);
    let state = miners[0].view().tip_state();
    for tx in &txs {
        if let TxBody::ProblemProposal { spec, .. } = &tx.body {
            let st = &state.problem(&spec.problem_id()).unwrap().status;
            assert!(matches!(st, ProblemStatus::Settled { .. }), "{st:?}");
        }
    }
    // Blocks from the last tick may still be in flight; deeper history must agree.
    let h = miners[0].view().height().min(miners[1].view().height()) - 5;
    assert_eq!(miners[0].view().main_block_at(h).unwrap().hash(), miners[1].view().main_block_at(h).unwrap().hash());
    let winners: std::collections::BTreeSet<usize> =
        events.iter().filter(|(_, e)| matches!(e, MinerEvent::Mined { user: true, .. })).map(|(i, _)| *i).collect();
    assert_eq!(winners.len(), 2, "both miners earned a user block");
    // Each problem went to a single solver, so someone walked away from a contested one.
    let abandoned = events.iter().filter(|(_, e)| matches!(e, MinerEvent::Abandoned { .. })).count();
    let committed = events.iter().filter(|(_, e)| matches!(e, MinerEvent::Committed { .. })).count();
    assert!(committed >= 4);
    assert!(abandoned + 4 >= committed, "{abandoned} abandoned, {committed} commitments");
}

#[test]
fn best_effort_claims_never_beat_brute_force() {
    for seed in 0..15 {
        let inst = generate_instance(SizeParams::ZeroOneProgramming { vars: 14, constraints: 12, max_coeff: 9 }, seed).unwrap();
        let (best, _) = exhaustive_best(&inst.spec);
        assert_eq!(best, inst.spec.constraints.len());
        for budget in [5u64, 50, 500] {
            match solve(&inst.spec, budget, seed) {
                SolveOutcome::Solved { assignment, .. } => assert_eq!(inst.spec.count_satisfied(&assignment), best),
                SolveOutcome::BudgetExhausted { best: Some((values, sat)), .. } => {
                    assert!(sat <= best);
                    assert_eq!(inst.spec.count_satisfied(&values), sat);
                }
                other => panic!("{other:?}"),
            }
        }
    }
}
