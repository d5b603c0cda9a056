//! Randomized backtracking search with interval consistency checks.
//!
//! One step is one attempted value assignment. The search is complete: given an
//! unbounded budget it either finds a full solution or exhausts the space.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::quality::check_assignment;
use super::spec::{CmpOp, Constraint, Expr, ProblemSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Solved { assignment: Vec<i64>, steps: u64 },
    BudgetExhausted {
        steps: u64,
        /// Greedy completion of the deepest consistent partial assignment, with its satisfied count.
        best: Option<(Vec<i64>, usize)>,
        /// True when the whole space was searched without a full solution.
        space_exhausted: bool,
    },
}

impl SolveOutcome {
    pub fn steps(&self) -> u64 {
        match self {
            SolveOutcome::Solved { steps, .. } | SolveOutcome::BudgetExhausted { steps, .. } => *steps,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved { .. })
    }
}

struct Frame {
    var: usize,
    values: Vec<i64>,
    next: usize,
}

pub fn solve(spec: &ProblemSpec, budget: u64, seed: u64) -> SolveOutcome {
    Search::new(spec, seed).run(budget)
}

struct Search<'a> {
    spec: &'a ProblemSpec,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    watching: Vec<Vec<usize>>,
    bounds: Vec<(i64, i64)>,
    values: Vec<i64>,
    assigned: Vec<bool>,
}

impl<'a> Search<'a> {
    fn new(spec: &'a ProblemSpec, seed: u64) -> Self {
        let n = spec.num_vars();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut watching = vec![Vec::new(); n];
        for (ci, c) in spec.constraints.iter().enumerate() {
            for v in c.vars() {
                if (v as usize) < n {
                    watching[v as usize].push(ci);
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        // Forced variables first; otherwise random order.
        order.sort_by_key(|&v| spec.domains[v].len() > 1);
        let bounds = spec
            .domains
            .iter()
            .map(|d| (*d.iter().min().unwrap_or(&0), *d.iter().max().unwrap_or(&0)))
            .collect();
        Search { spec, rng, order, watching, bounds, values: vec![0; n], assigned: vec![false; n] }
    }

    fn frame(&mut self, depth: usize) -> Frame {
        let var = self.order[depth];
        let mut values = self.spec.domains[var].clone();
        values.shuffle(&mut self.rng);
        Frame { var, values, next: 0 }
    }

    fn run(mut self, budget: u64) -> SolveOutcome {
        let n = self.spec.num_vars();
        if n == 0 || self.spec.domains.iter().any(Vec::is_empty) {
            return SolveOutcome::BudgetExhausted { steps: 0, best: None, space_exhausted: true };
        }
        let mut steps = 0u64;
        let mut stack = vec![self.frame(0)];
        let mut deepest = 0usize;
        let mut deepest_snapshot: Vec<Option<i64>> = vec![None; n];
        loop {
            let Some(top) = stack.last_mut() else {
                let best = self.complete(&deepest_snapshot);
                return SolveOutcome::BudgetExhausted { steps, best: Some(best), space_exhausted: true };
            };
            if top.next == top.values.len() {
                let var = top.var;
                stack.pop();
                self.assigned[var] = false;
                continue;
            }
            if steps >= budget {
                let best = self.complete(&deepest_snapshot);
                return SolveOutcome::BudgetExhausted { steps, best: Some(best), space_exhausted: false };
            }
            steps += 1;
            let var = top.var;
            let value = top.values[top.next];
            top.next += 1;
            self.values[var] = value;
            self.assigned[var] = true;
            if !self.consistent(var) {
                self.assigned[var] = false;
                continue;
            }
            let depth = stack.len();
            if depth > deepest {
                deepest = depth;
                for (i, slot) in deepest_snapshot.iter_mut().enumerate() {
                    *slot = self.assigned[i].then_some(self.values[i]);
                }
            }
            if depth == n {
                return SolveOutcome::Solved { assignment: self.values.clone(), steps };
            }
            let next = self.frame(depth);
            stack.push(next);
        }
    }

    fn consistent(&self, var: usize) -> bool {
        self.watching[var].iter().all(|&ci| self.may_hold(&self.spec.constraints[ci]))
    }

    fn may_hold(&self, c: &Constraint) -> bool {
        match c {
            Constraint::AllDifferent(vs) => {
                let mut seen: Vec<i64> =
                    vs.iter().filter(|&&v| self.assigned[v as usize]).map(|&v| self.values[v as usize]).collect();
                seen.sort_unstable();
                seen.windows(2).all(|w| w[0] != w[1])
            }
            Constraint::Compare { op, lhs, rhs } => {
                let (a_lo, a_hi) = self.interval(lhs);
                let (b_lo, b_hi) = self.interval(rhs);
                let lo = a_lo.saturating_sub(b_hi);
                let hi = a_hi.saturating_sub(b_lo);
                match op {
                    CmpOp::Eq => lo <= 0 && hi >= 0,
                    CmpOp::Ne => !(lo == 0 && hi == 0),
                    CmpOp::Lt => lo < 0,
                    CmpOp::Le => lo <= 0,
                    CmpOp::Gt => hi > 0,
                    CmpOp::Ge => hi >= 0,
                }
            }
        }
    }

    fn interval(&self, e: &Expr) -> (i64, i64) {
        match e {
            Expr::Var(v) => {
                let v = *v as usize;
                if self.assigned[v] {
                    (self.values[v], self.values[v])
                } else {
                    self.bounds[v]
                }
            }
            Expr::Const(c) => (*c, *c),
            Expr::Sum(items) => items.iter().fold((0i64, 0i64), |(lo, hi), e| {
                let (a, b) = self.interval(e);
                (lo.saturating_add(a), hi.saturating_add(b))
            }),
            Expr::Scale(c, e) => {
                let (a, b) = self.interval(e);
                let (x, y) = (c.saturating_mul(a), c.saturating_mul(b));
                (x.min(y), x.max(y))
            }
        }
    }

    /// Fills unassigned variables greedily, each taking the value that satisfies the most
    /// constraints whose variables are all fixed at that point.
    fn complete(&mut self, snapshot: &[Option<i64>]) -> (Vec<i64>, usize) {
        for (i, s) in snapshot.iter().enumerate() {
            self.assigned[i] = s.is_some();
            if let Some(v) = s {
                self.values[i] = *v;
            }
        }
        for depth in 0..self.order.len() {
            let var = self.order[depth];
            if self.assigned[var] {
                continue;
            }
            let mut best = (usize::MAX, self.spec.domains[var][0]);
            for &value in &self.spec.domains[var] {
                self.values[var] = value;
                self.assigned[var] = true;
                let broken = self.watching[var].iter().filter(|&&ci| !self.may_hold(&self.spec.constraints[ci])).count();
                if broken < best.0 {
                    best = (broken, value);
                }
            }
            self.values[var] = best.1;
        }
        let satisfied = check_assignment(self.spec, &self.values).map(|(s, _)| s).unwrap_or(0);
        (self.values.clone(), satisfied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowdwork::spec::Family;

    #[test]
    fn unconstrained_binary_variable() {
        let spec = ProblemSpec { family: Family::GenericCsp, domains: vec![vec![0, 1]], constraints: vec![] };
        let out = solve(&spec, 10, 7);
        assert!(out.is_solved());
        assert!(out.steps() <= 2);
    }

    #[test]
    fn triangle_two_coloring_is_exhausted() {
        let spec = ProblemSpec {
            family: Family::GraphColoring,
            domains: vec![vec![0, 1]; 3],
            constraints: vec![Constraint::ne(0, 1), Constraint::ne(1, 2), Constraint::ne(0, 2)],
        };
        match solve(&spec, 1_000_000, 3) {
            SolveOutcome::BudgetExhausted { space_exhausted, best: Some((_, sat)), .. } => {
                assert!(space_exhausted);
                assert_eq!(sat, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ProblemSpec {
            family: Family::GraphColoring,
            domains: vec![vec![0, 1, 2]; 6],
            constraints: (0..6).map(|i| Constraint::ne(i, (i + 1) % 6)).collect(),
        };
        assert_eq!(solve(&spec, 1000, 11), solve(&spec, 1000, 11));
    }

    #[test]
    fn linear_constraints_respected() {
        // x0 + x1 + x2 == 2 over {0,1}
        let spec = ProblemSpec {
            family: Family::ZeroOneProgramming,
            domains: vec![vec![0, 1]; 3],
            constraints: vec![Constraint::Compare {
                op: CmpOp::Eq,
                lhs: Expr::linear(&[(1, 0), (1, 1), (1, 2)]),
                rhs: Expr::Const(2),
            }],
        };
        let SolveOutcome::Solved { assignment, .. } = solve(&spec, 100, 1) else { panic!() };
        assert_eq!(assignment.iter().sum::<i64>(), 2);
    }
}
