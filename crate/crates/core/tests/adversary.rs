use crowdmine::adversary::{
    analytic_double_spend_payoff, analytic_fee_grab_payoff, run_double_spend, run_fee_grab, run_short_term_51,
    run_solution_steal, AttackPlan, DoubleSpendParams, FeeGrabParams, RaceSetup, ShortTermMode, ShortTermParams,
};
use crowdmine::ledger::{Amount, Ratio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest amount that breaks the volume bound: ceil(k * r).
fn volume_cap(k: Ratio, r: u64) -> u64 {
    (r as u128 * k.ppm() as u128).div_ceil(1_000_000) as u64
}

#[test]
fn analytic_payoffs_are_negative_under_the_volume_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 10_000 {
        let k = Ratio::from_ppm(rng.random_range(1..1_000_000));
        let r_problem = rng.random_range(1..10_000_000u64);
        let cap = volume_cap(k, r_problem);
        if cap == 0 {
            continue;
        }
        let volume = rng.random_range(0..cap);
        let v_tx = rng.random_range(0..=volume);
        let r_attacker = r_problem + rng.random_range(0..1_000_000u64);
        let p = analytic_double_spend_payoff(Amount(v_tx), Amount(volume), Amount(r_problem), Amount(r_attacker), k).unwrap();
        // Exact oracle in millionths: v_tx - k * r_attacker.
        let oracle = v_tx as i128 * 1_000_000 - k.ppm() as i128 * r_attacker as i128;
        assert_eq!(p.micro, oracle);
        assert!(p.is_negative(), "k {k:?} v {v_tx} vol {volume} r {r_problem}/{r_attacker}");

        let fee_volume = rng.random_range(0..volume_cap(k, r_attacker));
        let fees = rng.random_range(0..=fee_volume);
        let f = analytic_fee_grab_payoff(Amount(fees), Amount(fee_volume), Amount(r_attacker), k).unwrap();
        assert!(f.is_negative());
        checked += 1;
    }
}

#[test]
fn analytic_preconditions_are_enforced() {
    let k = Ratio::from_f64(0.05);
    assert!(analytic_double_spend_payoff(Amount(6), Amount(5), Amount(100), Amount(100), k).is_err());
    assert!(analytic_double_spend_payoff(Amount(5), Amount(5), Amount(100), Amount(100), k).is_err());
    assert!(analytic_double_spend_payoff(Amount(4), Amount(4), Amount(100), Amount(99), k).is_err());
    assert!(analytic_fee_grab_payoff(Amount(1), Amount(5), Amount(100), k).is_err());
}

const KS: [f64; 5] = [0.01, 0.05, 0.1, 0.25, 0.5];

#[test]
fn simulated_double_spends_lose_exactly_the_rounded_burn() {
    for (i, &kf) in KS.iter().enumerate() {
        let k = Ratio::from_f64(kf);
        let r_problem = 20_000;
        let r_attacker = r_problem + 500 * (i as u64 + 1);
        // Largest payment the victim block can legally carry.
        let v_tx = volume_cap(k, r_problem) - 1;
        let p = DoubleSpendParams { k, v_tx: Amount(v_tx), r_problem: Amount(r_problem), r_attacker: Amount(r_attacker), conflict_amount: Amount(0), seed: i as u64 };
        let out = run_double_spend(&p).unwrap();
        assert!(out.validated && out.succeeded, "k {kf}: {out:?}");
        assert_eq!(out.realized_payoff, v_tx as i128 - volume_cap(k, r_attacker) as i128, "k {kf}");
        assert!(out.realized_payoff < 0);
        let analytic = out.analytic_payoff.unwrap();
        assert!(out.realized_payoff * 1_000_000 <= analytic.micro);

        // An equal-valued fork loses the first-seen tie and leaves the deposit locked.
        let tie = DoubleSpendParams { r_attacker: Amount(r_problem), ..p };
        let out = run_double_spend(&tie).unwrap();
        assert!(out.validated && !out.succeeded);
        assert!(out.realized_payoff < 0);

        // The attacker block itself moving too much value is refused by honest validation.
        let greedy = DoubleSpendParams { conflict_amount: Amount(volume_cap(k, r_attacker)), ..p };
        let out = run_double_spend(&greedy).unwrap();
        assert!(!out.validated && !out.succeeded);
        assert_eq!(out.rejection.as_deref(), Some("VolumeExceeded"));
    }
}

#[test]
fn simulated_fee_grabs_never_pay() {
    for (i, &kf) in KS.iter().enumerate() {
        let k = Ratio::from_f64(kf);
        let r = 10_000 + 1_000 * i as u64;
        let cap = volume_cap(k, r) - 1;
        // Fees equal to amounts: the most a block of this volume can collect.
        let transfers = vec![(Amount(cap / 2), Amount(cap / 2)), (Amount(cap - cap / 2), Amount(cap - cap / 2))];
        let p = FeeGrabParams { k, r_attacker: Amount(r), transfers, seed: i as u64 };
        let out = run_fee_grab(&p).unwrap();
        assert!(out.validated, "k {kf}: {out:?}");
        assert_eq!(out.realized_payoff, cap as i128 - volume_cap(k, r) as i128);
        assert!(out.realized_payoff < 0);

        let over = FeeGrabParams { transfers: vec![(Amount(cap + 1), Amount(cap + 1))], ..p };
        let out = run_fee_grab(&over).unwrap();
        assert_eq!(out.rejection.as_deref(), Some("VolumeExceeded"));
    }
}

#[test]
fn attack_plans_round_trip_through_json() {
    let plan = AttackPlan::DoubleSpend(DoubleSpendParams {
        k: Ratio::from_f64(0.1),
        v_tx: Amount(50),
        r_problem: Amount(1_000),
        r_attacker: Amount(1_000),
        conflict_amount: Amount(0),
        seed: 4,
    });
    let text = serde_json::to_string(&plan).unwrap();
    let back: AttackPlan = serde_json::from_str(&text).unwrap();
    assert_eq!(back, plan);
    assert_eq!(back.run().unwrap(), plan.run().unwrap());
}

#[test]
fn steal_success_anchors() {
    let setup = RaceSetup::default();
    let (none, _) = run_solution_steal(&setup, 1, 0.0, 10, 500).unwrap();
    assert_eq!(none.successes, 0);
    let (strong, _) = run_solution_steal(&setup, 1, 0.9, 20, 500).unwrap();
    assert!(strong.rate > 0.5, "{strong:?}");
}

#[test]
fn short_term_without_boost_rarely_reverts() {
    let setup = RaceSetup::default();
    let p = ShortTermParams { mode: ShortTermMode::CrowdMine, attacker_power: 40, boost: 1, duration: 50, depth: 3, value: Amount(10_000) };
    let (stats, records) = run_short_term_51(&setup, &p, 30, 9_000).unwrap();
    assert!(stats.first.successes <= 1, "{stats:?}");
    assert!(records.iter().all(|(a, _)| a.ticks <= setup.max_ticks + 100));
}
