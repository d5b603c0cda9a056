use std::collections::HashSet;

use crowdmine::crowdwork::{
    generate_instance, solve, verify_solution, ClaimKind, CmpOp, Constraint, Expr, Family, Preset, ProblemSpec,
    QualityCriterion, RewardLevel, RewardTable, SizeParams, SolutionClaim, VerifyError,
};
use crowdmine::ledger::{Amount, Ratio};
use proptest::prelude::*;

const FAMILIES: [Family; 3] = [Family::GraphColoring, Family::Sudoku, Family::ZeroOneProgramming];

fn claim(values: Vec<i64>, level: u32) -> SolutionClaim {
    SolutionClaim { kind: ClaimKind::Assignment(values), claimed_level: level }
}

/// Plain grid check: every row, column and box is a permutation of 1..=side.
fn grid_ok(grid: &[i64], base: usize) -> bool {
    let side = base * base;
    let perm = |cells: Vec<i64>| {
        let mut c = cells;
        c.sort_unstable();
        c == (1..=side as i64).collect::<Vec<_>>()
    };
    (0..side).all(|r| perm((0..side).map(|c| grid[r * side + c]).collect()))
        && (0..side).all(|c| perm((0..side).map(|r| grid[r * side + c]).collect()))
        && (0..side).all(|b| {
            let (br, bc) = (b / base * base, b % base * base);
            perm((0..side).map(|i| grid[(br + i / base) * side + bc + i % base]).collect())
        })
}

#[test]
fn solved_sudokus_pass_an_independent_grid_check() {
    for seed in 0..40 {
        let inst = generate_instance(Preset::Sim.params(Family::Sudoku).unwrap(), seed).unwrap();
        assert!(grid_ok(&inst.planted, 3));
        let out = solve(&inst.spec, 5_000_000, seed);
        let crowdmine::crowdwork::SolveOutcome::Solved { assignment, .. } = out else { panic!("seed {seed} unsolved") };
        assert!(grid_ok(&assignment, 3), "seed {seed}");
        for (v, d) in assignment.iter().zip(&inst.spec.domains) {
            if d.len() == 1 {
                assert_eq!(*v, d[0], "given overwritten");
            }
        }
        let t = inst.spec.tiered_table(Amount(100), Ratio::from_f64(0.5), Ratio::from_f64(0.1));
        assert_eq!(verify_solution(&inst.spec, &claim(assignment, 1), &t).unwrap().achieved, Some(1));
    }
}

/// Every completion of a 4x4 puzzle, by brute force over the blank cells.
fn completions(spec: &ProblemSpec) -> Vec<Vec<i64>> {
    let blanks: Vec<usize> = (0..16).filter(|&i| spec.domains[i].len() > 1).collect();
    let mut out = Vec::new();
    for code in 0..4u64.pow(blanks.len() as u32) {
        let mut g: Vec<i64> = spec.domains.iter().map(|d| d[0]).collect();
        let mut c = code;
        for &b in &blanks {
            g[b] = (c % 4) as i64 + 1;
            c /= 4;
        }
        if grid_ok(&g, 2) {
            out.push(g);
        }
    }
    out
}

#[test]
fn four_by_four_enumeration_matches_verifier() {
    for seed in 0..12 {
        let inst = generate_instance(SizeParams::Sudoku { base: 2, blanks: 9 }, seed).unwrap();
        let all = completions(&inst.spec);
        assert!(all.contains(&inst.planted));
        let set: HashSet<Vec<i64>> = all.iter().cloned().collect();
        let t = RewardTable {
            levels: vec![
                RewardLevel { criterion: QualityCriterion::MinSatisfied(12), reward: Amount(10) },
                RewardLevel { criterion: QualityCriterion::NotFound, reward: Amount(1) },
            ],
            min_portion: Ratio::from_f64(0.1),
        };
        // Every in-domain grid: the verifier accepts level 1 exactly for enumerated completions.
        let blanks: Vec<usize> = (0..16).filter(|&i| inst.spec.domains[i].len() > 1).collect();
        for code in 0..4u64.pow(blanks.len() as u32) {
            let mut g = inst.planted.clone();
            let mut c = code;
            for &b in &blanks {
                g[b] = (c % 4) as i64 + 1;
                c /= 4;
            }
            let ok = verify_solution(&inst.spec, &claim(g.clone(), 1), &t).is_ok();
            assert_eq!(ok, set.contains(&g));
        }
        let nf = SolutionClaim { kind: ClaimKind::NotFound, claimed_level: 2 };
        assert!(matches!(verify_solution(&inst.spec, &nf, &t), Err(VerifyError::NotFoundRefuted { level: 1 })));
        let found = solve(&inst.spec, 1_000_000, seed);
        match found {
            crowdmine::crowdwork::SolveOutcome::Solved { assignment, .. } => assert!(set.contains(&assignment)),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn zero_one_planted_and_brute_force_agree() {
    for seed in 0..20 {
        let inst = generate_instance(SizeParams::ZeroOneProgramming { vars: 12, constraints: 8, max_coeff: 9 }, seed).unwrap();
        let m = inst.spec.constraints.len();
        assert_eq!(inst.spec.count_satisfied(&inst.planted), m);
        // Brute force: count feasible points with hand-evaluated sums.
        let rows: Vec<(Vec<i64>, i64)> = inst
            .spec
            .constraints
            .iter()
            .map(|c| match c {
                Constraint::Compare { op: CmpOp::Le, lhs, rhs: Expr::Const(b) } => {
                    let coeffs = (0..12).map(|j| {
                        let mut x = vec![0; 12];
                        x[j] = 1;
                        lhs.eval(&x)
                    });
                    (coeffs.collect(), *b)
                }
                other => panic!("unexpected constraint {other:?}"),
            })
            .collect();
        let mut feasible = 0;
        for mask in 0u32..1 << 12 {
            let x: Vec<i64> = (0..12).map(|j| (mask >> j & 1) as i64).collect();
            let by_hand = rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(a, x)| a * x).sum::<i64>() <= *b);
            assert_eq!(by_hand, inst.spec.count_satisfied(&x) == m);
            feasible += by_hand as u32;
        }
        assert!(feasible >= 1);
    }
}

#[test]
fn hundred_planted_instances_per_family() {
    for preset in [Preset::Sim, Preset::Desk] {
        for fam in FAMILIES {
            let p = preset.params(fam).unwrap();
            for seed in 0..100 {
                let inst = generate_instance(p, seed).unwrap();
                assert_eq!(inst.spec.family, fam);
                inst.spec.validate().unwrap();
                let t = inst.spec.tiered_table(Amount(1_000), Ratio::from_f64(0.5), Ratio::from_f64(0.1));
                t.validate(&inst.spec).unwrap();
                let v = verify_solution(&inst.spec, &claim(inst.planted.clone(), 1), &t).unwrap();
                assert_eq!((v.level, v.satisfied), (1, inst.spec.constraints.len()));
                assert_eq!(generate_instance(p, seed).unwrap(), inst);
            }
        }
    }
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

#[test]
fn desk_instances_are_calibrated_and_verification_is_cheap() {
    // Unsolved runs count at the full budget, which can only raise the median.
    let budget = 2_000_000;
    for fam in FAMILIES {
        let p = Preset::Desk.params(fam).unwrap();
        let mut solve_steps = Vec::new();
        let mut ratios = Vec::new();
        for seed in 0..21 {
            let inst = generate_instance(p, seed).unwrap();
            let out = solve(&inst.spec, budget, seed + 99);
            solve_steps.push(out.steps());
            if let crowdmine::crowdwork::SolveOutcome::Solved { assignment, steps } = out {
                let t = inst.spec.tiered_table(Amount(1_000), Ratio::from_f64(0.5), Ratio::from_f64(0.1));
                let cost = verify_solution(&inst.spec, &claim(assignment, 1), &t).unwrap().cost;
                ratios.push((cost * 1_000_000 / steps.max(1), cost, steps));
            }
        }
        let med = median(solve_steps);
        assert!((20_000..=500_000).contains(&med), "{fam:?} median {med}");
        let total_cost: u64 = ratios.iter().map(|r| r.1).sum();
        let total_steps: u64 = ratios.iter().map(|r| r.2).sum();
        assert!(total_cost * 100 < total_steps, "{fam:?}: verify {total_cost} vs solve {total_steps}");
        let med_ratio = median(ratios.iter().map(|r| r.0).collect());
        assert!(med_ratio < 10_000, "{fam:?} median verify/solve {med_ratio} ppm");
    }
}

#[test]
fn not_found_on_unsatisfiable_instance_accepted() {
    // Triangle with two colours has no proper colouring.
    let spec = ProblemSpec {
        family: Family::GraphColoring,
        domains: vec![vec![0, 1]; 3],
        constraints: vec![Constraint::ne(0, 1), Constraint::ne(1, 2), Constraint::ne(0, 2)],
    };
    let t = RewardTable {
        levels: vec![
            RewardLevel { criterion: QualityCriterion::MinSatisfied(3), reward: Amount(100) },
            RewardLevel { criterion: QualityCriterion::NotFound, reward: Amount(10) },
        ],
        min_portion: Ratio::from_f64(0.1),
    };
    let nf = SolutionClaim { kind: ClaimKind::NotFound, claimed_level: t.not_found_level().unwrap() };
    let v = verify_solution(&spec, &nf, &t).unwrap();
    assert_eq!(v.achieved, None);
    assert_eq!(t.reward_at(v.level), Some(Amount(10)));
    assert!(!solve(&spec, 1_000, 1).is_solved());
    // With a two-of-three tier the same claim is refuted: any colouring satisfies two edges.
    let tiered = spec.tiered_table(Amount(100), Ratio::from_f64(0.5), Ratio::from_f64(0.1));
    let nf = SolutionClaim { kind: ClaimKind::NotFound, claimed_level: tiered.not_found_level().unwrap() };
    assert_eq!(verify_solution(&spec, &nf, &tiered), Err(VerifyError::NotFoundRefuted { level: 2 }));
}

fn small_gc() -> impl Strategy<Value = (ProblemSpec, Vec<i64>)> {
    (3usize..8, prop::collection::vec((0u32..8, 0u32..8), 1..16)).prop_flat_map(|(n, edges)| {
        let constraints: Vec<Constraint> = edges
            .into_iter()
            .map(|(a, b)| (a % n as u32, b % n as u32))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| Constraint::ne(a, b))
            .collect();
        let spec = ProblemSpec { family: Family::GraphColoring, domains: vec![vec![0, 1, 2]; n], constraints };
        (Just(spec), prop::collection::vec(0i64..3, n))
    })
}

proptest! {
    /// A claim is accepted iff the assignment reaches the claimed tier or a better one, and
    /// an accepted claim at level l is also accepted at every lower-paying level.
    #[test]
    fn level_acceptance_is_monotone((spec, values) in small_gc(), t2 in 0u32..16, t3 in 0u32..16) {
        prop_assume!(!spec.constraints.is_empty());
        let m = spec.constraints.len() as u32;
        let mut ts: Vec<u32> = vec![t2.min(m - 1), t3.min(m - 1)];
        ts.sort_unstable_by(|a, b| b.cmp(a));
        ts.dedup();
        let mut levels = vec![RewardLevel { criterion: QualityCriterion::MinSatisfied(m), reward: Amount(100) }];
        for (i, t) in ts.iter().enumerate() {
            levels.push(RewardLevel { criterion: QualityCriterion::MinSatisfied(*t), reward: Amount(80 - 20 * i as u64) });
        }
        let table = RewardTable { levels, min_portion: Ratio::from_f64(0.1) };
        let sat = spec.constraints.iter().filter(|c| c.satisfied(&values)).count() as u32;
        let mut accepted_before = false;
        for level in 1..=table.levels.len() as u32 {
            let threshold = match table.criterion_at(level).unwrap() {
                QualityCriterion::MinSatisfied(t) => t,
                QualityCriterion::NotFound => unreachable!(),
            };
            let ok = verify_solution(&spec, &claim(values.clone(), level), &table).is_ok();
            prop_assert_eq!(ok, sat >= threshold || accepted_before);
            if accepted_before {
                prop_assert!(ok);
            }
            accepted_before |= ok;
            if ok {
                prop_assert!(table.reward_at(level).unwrap() <= table.reward_at(1).unwrap());
            }
        }
    }

    #[test]
    fn solver_output_always_verifies((spec, _) in small_gc(), seed in any::<u64>()) {
        let out = solve(&spec, 100_000, seed);
        let brute = (0..3u64.pow(spec.domains.len() as u32)).any(|code| {
            let x: Vec<i64> = (0..spec.domains.len()).map(|i| (code / 3u64.pow(i as u32) % 3) as i64).collect();
            spec.constraints.iter().all(|c| c.satisfied(&x))
        });
        prop_assert_eq!(out.is_solved(), brute);
        if let crowdmine::crowdwork::SolveOutcome::Solved { assignment, .. } = out {
            prop_assert!(spec.constraints.iter().all(|c| c.satisfied(&assignment)));
        }
    }
}
