//! Attack strategies: analytic payoff bounds, scripted double-spend and fee-grab chains, and
//! network races for solution stealing and short-term majority attacks.

pub mod analytic;
pub mod race;
pub mod scripted;
pub mod stats;
pub mod trials;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analytic::{analytic_double_spend_payoff, analytic_fee_grab_payoff, AnalyticError, Payoff};
pub use race::{RaceAttacker, RaceGoal, RaceReport, RaceStage};
pub use scripted::{run_double_spend, run_fee_grab, DoubleSpendParams, FeeGrabParams, PlantedProblem, ScriptedChain};
pub use stats::{mcnemar_one_sided, wilson_interval, PairedStats, RateStats};
pub use trials::{
    run_short_term_51, run_solution_steal, short_term_trial, steal_trial, RaceSetup, ShortTermMode, ShortTermParams,
    TrialRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("attack plan is inconsistent: {0}")]
    Inconsistent(String),
    #[error("scenario setup failed: {0}")]
    Setup(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    DoubleSpend,
    FeeGrab,
    SolutionSteal,
    ShortTerm51,
}

/// One attack to run, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackPlan {
    DoubleSpend(DoubleSpendParams),
    FeeGrab(FeeGrabParams),
    SolutionSteal { setup: RaceSetup, t_min: u64, alpha: f64, seed: u64 },
    ShortTerm51 { setup: RaceSetup, params: ShortTermParams, seed: u64 },
}

impl AttackPlan {
    pub fn kind(&self) -> AttackKind {
        match self {
            AttackPlan::DoubleSpend(_) => AttackKind::DoubleSpend,
            AttackPlan::FeeGrab(_) => AttackKind::FeeGrab,
            AttackPlan::SolutionSteal { .. } => AttackKind::SolutionSteal,
            AttackPlan::ShortTerm51 { .. } => AttackKind::ShortTerm51,
        }
    }

    pub fn run(&self) -> Result<AttackOutcome, AttackError> {
        match self {
            AttackPlan::DoubleSpend(p) => run_double_spend(p),
            AttackPlan::FeeGrab(p) => run_fee_grab(p),
            AttackPlan::SolutionSteal { setup, t_min, alpha, seed } => {
                Ok(steal_trial(setup, *t_min, *alpha, *seed)?.into_outcome())
            }
            AttackPlan::ShortTerm51 { setup, params, seed } => Ok(short_term_trial(setup, params, *seed)?.into_outcome()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub succeeded: bool,
    /// Whether every attacker block passed honest validation.
    pub validated: bool,
    /// Rejection kind when an attacker block was refused.
    pub rejection: Option<String>,
    /// Attacker balance on the attack chain minus its balance on the paired honest chain.
    /// For network races, where no counterfactual run is made, this is the attacker's balance
    /// change on the honest main chain.
    pub realized_payoff: i128,
    /// Closed-form bound for the same parameters, when its preconditions hold.
    pub analytic_payoff: Option<Payoff>,
    pub ticks: u64,
}
