//! User problems: constraint-satisfaction specs, verification, solving and generation.

pub mod generate;
pub mod quality;
pub mod solver;
pub mod spec;

pub use generate::{generate_instance, GenerateError, Instance, Preset, SizeParams};
pub use quality::{verify_solution, Verified, VerifyError};
pub use solver::{solve, SolveOutcome};
pub use spec::{
    ClaimKind, CmpOp, Constraint, Expr, Family, ProblemSpec, QualityCriterion, RewardLevel, RewardTable,
    SolutionClaim, SpecError,
};
