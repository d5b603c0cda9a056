//! Public verification of solution claims against a reward table.

use thiserror::Error;

use super::spec::{ClaimKind, ProblemSpec, QualityCriterion, RewardTable, SolutionClaim};

/// Largest domain product for which a solution-not-found claim is checked exhaustively.
pub const REFUTATION_LIMIT: u128 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("assignment has {got} values, problem has {expected} variables")]
    WrongArity { expected: usize, got: usize },
    #[error("value {value} of variable {var} is outside its domain")]
    DomainViolation { var: usize, value: i64 },
    #[error("claimed level {claimed} is not defined by the reward table")]
    NoSuchLevel { claimed: u32 },
    #[error("claimed level {claimed} but assignment only reaches {achieved:?}")]
    LevelOverclaimed { claimed: u32, achieved: Option<u32> },
    #[error("reward table has no solution-not-found level at {claimed}")]
    NotFoundUnsupported { claimed: u32 },
    #[error("solution-not-found refuted: an assignment reaches level {level}")]
    NotFoundRefuted { level: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verified {
    /// Level the claim is accepted (and paid) at: the claimed level.
    pub level: u32,
    /// Best level the assignment actually reaches; `None` for solution-not-found.
    pub achieved: Option<u32>,
    pub satisfied: usize,
    /// Work units spent: domain checks plus expression nodes evaluated.
    pub cost: u64,
}

/// Best (lowest-index) assignment level reached with `satisfied` constraints.
pub fn level_for(table: &RewardTable, satisfied: usize) -> Option<u32> {
    table.levels.iter().enumerate().find_map(|(i, l)| match l.criterion {
        QualityCriterion::MinSatisfied(t) if satisfied >= t as usize => Some(i as u32 + 1),
        _ => None,
    })
}

pub fn verify_solution(
    spec: &ProblemSpec,
    claim: &SolutionClaim,
    table: &RewardTable,
) -> Result<Verified, VerifyError> {
    let claimed = claim.claimed_level;
    let criterion = table.criterion_at(claimed).ok_or(VerifyError::NoSuchLevel { claimed })?;
    match &claim.kind {
        ClaimKind::Assignment(values) => {
            let (satisfied, cost) = check_assignment(spec, values)?;
            let achieved = level_for(table, satisfied);
            match achieved {
                Some(a) if a <= claimed => Ok(Verified { level: claimed, achieved, satisfied, cost }),
                _ => Err(VerifyError::LevelOverclaimed { claimed, achieved }),
            }
        }
        ClaimKind::NotFound => {
            if criterion != QualityCriterion::NotFound {
                return Err(VerifyError::NotFoundUnsupported { claimed });
            }
            let mut cost = 1;
            if spec.search_space() <= REFUTATION_LIMIT {
                let (best, spent) = exhaustive_best(spec);
                cost += spent;
                if let Some(level) = level_for(table, best) {
                    return Err(VerifyError::NotFoundRefuted { level });
                }
            }
            Ok(Verified { level: claimed, achieved: None, satisfied: 0, cost })
        }
    }
}

/// Domain check plus satisfied-constraint count, linear in the problem size.
pub fn check_assignment(spec: &ProblemSpec, values: &[i64]) -> Result<(usize, u64), VerifyError> {
    if values.len() != spec.num_vars() {
        return Err(VerifyError::WrongArity { expected: spec.num_vars(), got: values.len() });
    }
    let mut cost = 0u64;
    for (var, (value, domain)) in values.iter().zip(&spec.domains).enumerate() {
        cost += 1;
        if !domain.contains(value) {
            return Err(VerifyError::DomainViolation { var, value: *value });
        }
    }
    let mut satisfied = 0;
    for c in &spec.constraints {
        cost += c.size();
        if c.satisfied(values) {
            satisfied += 1;
        }
    }
    Ok((satisfied, cost))
}

/// Maximum satisfied-constraint count over every assignment (odometer enumeration).
pub fn exhaustive_best(spec: &ProblemSpec) -> (usize, u64) {
    let n = spec.num_vars();
    let mut idx = vec![0usize; n];
    let mut values: Vec<i64> = spec.domains.iter().map(|d| d[0]).collect();
    let total = spec.constraints.len();
    let mut best = 0;
    let mut cost = 0u64;
    loop {
        let s = spec.count_satisfied(&values);
        cost += spec.constraints.len() as u64;
        best = best.max(s);
        if best == total {
            return (best, cost);
        }
        let mut i = 0;
        loop {
            if i == n {
                return (best, cost);
            }
            idx[i] += 1;
            if idx[i] < spec.domains[i].len() {
                values[i] = spec.domains[i][idx[i]];
                break;
            }
            idx[i] = 0;
            values[i] = spec.domains[i][0];
            i += 1;
        }
    }
}
