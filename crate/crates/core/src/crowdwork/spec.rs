//! Constraint-satisfaction problem descriptions and reward tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::codec::{CanonicalEncode, Encoder};
use crate::ledger::crypto::sha256;
use crate::ledger::{Amount, Hash256, Ratio};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GraphColoring,
    Sudoku,
    ZeroOneProgramming,
    GenericCsp,
}

impl Family {
    pub const GENERATED: [Family; 3] = [Family::GraphColoring, Family::Sudoku, Family::ZeroOneProgramming];

    fn tag(self) -> u8 {
        match self {
            Family::GraphColoring => 0,
            Family::Sudoku => 1,
            Family::ZeroOneProgramming => 2,
            Family::GenericCsp => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::GraphColoring => "graph_coloring",
            Family::Sudoku => "sudoku",
            Family::ZeroOneProgramming => "zero_one_programming",
            Family::GenericCsp => "generic_csp",
        }
    }
}

/// Integer expression tree over problem variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Var(u32),
    Const(i64),
    Sum(Vec<Expr>),
    Scale(i64, Box<Expr>),
}

impl Expr {
    pub fn var(v: u32) -> Self {
        Expr::Var(v)
    }

    /// `Σ coeff_i * x_i`, dropping zero coefficients.
    pub fn linear(terms: &[(i64, u32)]) -> Self {
        Expr::Sum(
            terms
                .iter()
                .filter(|(c, _)| *c != 0)
                .map(|&(c, v)| if c == 1 { Expr::Var(v) } else { Expr::Scale(c, Box::new(Expr::Var(v))) })
                .collect(),
        )
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(u32)) {
        match self {
            Expr::Var(v) => f(*v),
            Expr::Const(_) => {}
            Expr::Sum(items) => items.iter().for_each(|e| e.for_each_var(f)),
            Expr::Scale(_, e) => e.for_each_var(f),
        }
    }

    pub fn node_count(&self) -> u64 {
        match self {
            Expr::Var(_) | Expr::Const(_) => 1,
            Expr::Sum(items) => 1 + items.iter().map(Expr::node_count).sum::<u64>(),
            Expr::Scale(_, e) => 1 + e.node_count(),
        }
    }

    /// Evaluates under a full assignment. Saturating so hostile specs cannot panic a validator.
    pub fn eval(&self, values: &[i64]) -> i64 {
        match self {
            Expr::Var(v) => values[*v as usize],
            Expr::Const(c) => *c,
            Expr::Sum(items) => items.iter().fold(0i64, |acc, e| acc.saturating_add(e.eval(values))),
            Expr::Scale(c, e) => c.saturating_mul(e.eval(values)),
        }
    }

    fn encode_to(&self, enc: &mut Encoder) {
        match self {
            Expr::Var(v) => {
                enc.u8(0).u64(*v as u64);
            }
            Expr::Const(c) => {
                enc.u8(1).i64(*c);
            }
            Expr::Sum(items) => {
                enc.u8(2).len_prefix(items.len());
                for e in items {
                    e.encode_to(enc);
                }
            }
            Expr::Scale(c, e) => {
                enc.u8(3).i64(*c);
                e.encode_to(enc);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Compare { op: CmpOp, lhs: Expr, rhs: Expr },
    AllDifferent(Vec<u32>),
}

impl Constraint {
    pub fn ne(a: u32, b: u32) -> Self {
        Constraint::Compare { op: CmpOp::Ne, lhs: Expr::Var(a), rhs: Expr::Var(b) }
    }

    pub fn vars(&self) -> Vec<u32> {
        let mut out = Vec::new();
        match self {
            Constraint::Compare { lhs, rhs, .. } => {
                lhs.for_each_var(&mut |v| out.push(v));
                rhs.for_each_var(&mut |v| out.push(v));
            }
            Constraint::AllDifferent(vs) => out.extend_from_slice(vs),
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Size measure used for verification cost accounting.
    pub fn size(&self) -> u64 {
        match self {
            Constraint::Compare { lhs, rhs, .. } => 1 + lhs.node_count() + rhs.node_count(),
            Constraint::AllDifferent(vs) => vs.len() as u64,
        }
    }

    pub fn satisfied(&self, values: &[i64]) -> bool {
        match self {
            Constraint::Compare { op, lhs, rhs } => op.holds(lhs.eval(values), rhs.eval(values)),
            Constraint::AllDifferent(vs) => {
                let mut seen: Vec<i64> = vs.iter().map(|&v| values[v as usize]).collect();
                seen.sort_unstable();
                seen.windows(2).all(|w| w[0] != w[1])
            }
        }
    }

    fn encode_to(&self, enc: &mut Encoder) {
        match self {
            Constraint::Compare { op, lhs, rhs } => {
                enc.u8(0).u8(op.tag());
                lhs.encode_to(enc);
                rhs.encode_to(enc);
            }
            Constraint::AllDifferent(vs) => {
                enc.u8(1).len_prefix(vs.len());
                for v in vs {
                    enc.u64(*v as u64);
                }
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("problem has no variables")]
    NoVariables,
    #[error("variable {0} has an empty domain")]
    EmptyDomain(usize),
    #[error("constraint {constraint} references variable {var} out of range")]
    VariableOutOfRange { constraint: usize, var: u32 },
    #[error("reward table has no levels")]
    EmptyTable,
    #[error("reward level {0} pays nothing")]
    ZeroReward(usize),
    #[error("reward level {0} pays more than the level above it")]
    RewardIncreasing(usize),
    #[error("level 1 must require all {0} constraints")]
    TopLevelNotFull(usize),
    #[error("quality thresholds must strictly decrease (level {0})")]
    ThresholdNotDecreasing(usize),
    #[error("solution-not-found may only be the last level")]
    NotFoundNotLast,
    #[error("lowest reward is below the minimum portion of the deposit")]
    BelowMinimumPortion,
    #[error("minimum portion must be in (0, 1]")]
    BadMinPortion,
}

/// A user problem: finite-domain variables and constraints over them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub family: Family,
    pub domains: Vec<Vec<i64>>,
    pub constraints: Vec<Constraint>,
}

impl ProblemSpec {
    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.domains.is_empty() {
            return Err(SpecError::NoVariables);
        }
        if let Some(i) = self.domains.iter().position(Vec::is_empty) {
            return Err(SpecError::EmptyDomain(i));
        }
        let n = self.domains.len() as u32;
        for (ci, c) in self.constraints.iter().enumerate() {
            if let Some(var) = c.vars().into_iter().find(|&v| v >= n) {
                return Err(SpecError::VariableOutOfRange { constraint: ci, var });
            }
        }
        Ok(())
    }

    /// Identifier committed to on chain.
    pub fn problem_id(&self) -> Hash256 {
        sha256(&self.canonical_bytes())
    }

    /// Number of full assignments, saturating.
    pub fn search_space(&self) -> u128 {
        self.domains.iter().fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    pub fn count_satisfied(&self, values: &[i64]) -> usize {
        self.constraints.iter().filter(|c| c.satisfied(values)).count()
    }

    /// Standard table: full solution, one partial tier at `partial_fraction` of constraints,
    /// and solution-not-found, paying `top`, `top * partial_ratio`, `top * min_portion`.
    pub fn tiered_table(&self, top: Amount, partial_ratio: Ratio, min_portion: Ratio) -> RewardTable {
        let m = self.constraints.len() as u32;
        let mut levels = vec![RewardLevel { criterion: QualityCriterion::MinSatisfied(m), reward: top }];
        let floor = min_portion.apply_ceil(top).max(Amount(1));
        let partial = (m as u64 * 9 / 10) as u32;
        if partial < m && partial > 0 {
            let r = partial_ratio.apply_floor(top).max(floor);
            levels.push(RewardLevel { criterion: QualityCriterion::MinSatisfied(partial), reward: r });
        }
        levels.push(RewardLevel { criterion: QualityCriterion::NotFound, reward: floor });
        RewardTable { levels, min_portion }
    }
}

impl CanonicalEncode for ProblemSpec {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(self.family.tag());
        enc.len_prefix(self.domains.len());
        for d in &self.domains {
            enc.len_prefix(d.len());
            for v in d {
                enc.i64(*v);
            }
        }
        enc.len_prefix(self.constraints.len());
        for c in &self.constraints {
            c.encode_to(enc);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityCriterion {
    /// Assignment satisfying at least this many constraints.
    MinSatisfied(u32),
    /// Claim that no acceptable assignment was found.
    NotFound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewardLevel {
    pub criterion: QualityCriterion,
    pub reward: Amount,
}

/// Quality tiers for a problem, level 1 (index 0) paying the most.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewardTable {
    pub levels: Vec<RewardLevel>,
    pub min_portion: Ratio,
}

impl RewardTable {
    /// Deposit locked by the proposal: the level-1 reward.
    pub fn top_reward(&self) -> Amount {
        self.levels.first().map(|l| l.reward).unwrap_or(Amount::ZERO)
    }

    /// Reward for a 1-based level, if it exists.
    pub fn reward_at(&self, level: u32) -> Option<Amount> {
        level.checked_sub(1).and_then(|i| self.levels.get(i as usize)).map(|l| l.reward)
    }

    pub fn criterion_at(&self, level: u32) -> Option<QualityCriterion> {
        level.checked_sub(1).and_then(|i| self.levels.get(i as usize)).map(|l| l.criterion)
    }

    pub fn not_found_level(&self) -> Option<u32> {
        self.levels
            .iter()
            .position(|l| l.criterion == QualityCriterion::NotFound)
            .map(|i| i as u32 + 1)
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<(), SpecError> {
        if self.levels.is_empty() {
            return Err(SpecError::EmptyTable);
        }
        if self.min_portion == Ratio::ZERO {
            return Err(SpecError::BadMinPortion);
        }
        let m = spec.constraints.len();
        let mut prev_threshold: Option<u32> = None;
        for (i, level) in self.levels.iter().enumerate() {
            if level.reward.is_zero() {
                return Err(SpecError::ZeroReward(i + 1));
            }
            if i > 0 && level.reward > self.levels[i - 1].reward {
                return Err(SpecError::RewardIncreasing(i + 1));
            }
            match level.criterion {
                QualityCriterion::MinSatisfied(t) => {
                    if i == 0 && t as usize != m {
                        return Err(SpecError::TopLevelNotFull(m));
                    }
                    if prev_threshold.is_some_and(|p| t >= p) {
                        return Err(SpecError::ThresholdNotDecreasing(i + 1));
                    }
                    prev_threshold = Some(t);
                }
                QualityCriterion::NotFound => {
                    if i + 1 != self.levels.len() || i == 0 {
                        return Err(SpecError::NotFoundNotLast);
                    }
                }
            }
        }
        let lowest = self.levels.last().unwrap().reward;
        if !self.min_portion.is_reached_by(lowest, self.top_reward()) {
            return Err(SpecError::BelowMinimumPortion);
        }
        Ok(())
    }
}

impl CanonicalEncode for RewardTable {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.len_prefix(self.levels.len());
        for l in &self.levels {
            match l.criterion {
                QualityCriterion::MinSatisfied(t) => enc.u8(0).u64(t as u64),
                QualityCriterion::NotFound => enc.u8(1),
            };
            enc.amount(l.reward);
        }
        enc.u64(self.min_portion.ppm() as u64);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Assignment(Vec<i64>),
    NotFound,
}

/// A miner's answer to a problem, with the quality level it claims (1-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolutionClaim {
    pub kind: ClaimKind,
    pub claimed_level: u32,
}

impl CanonicalEncode for SolutionClaim {
    fn encode_to(&self, enc: &mut Encoder) {
        match &self.kind {
            ClaimKind::Assignment(values) => {
                enc.u8(0).len_prefix(values.len());
                for v in values {
                    enc.i64(*v);
                }
            }
            ClaimKind::NotFound => {
                enc.u8(1);
            }
        }
        enc.u64(self.claimed_level as u64);
    }
}
