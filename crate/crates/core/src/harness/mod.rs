//! Experiment runner: configuration, metric windows, block persistence, chain replay
//! and report tables.

pub mod config;
pub mod metrics;
pub mod report;
pub mod run;
pub mod store;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use metrics::{compute_series, supply_deltas, supply_slope, BlockDelta, CounterSnapshots, MetricsSample};
pub use report::{report, write_report, ConfigSummary, Report, Stat};
pub use run::{build_simulation, genesis_for, miner_key, recompute_from_outputs, run_experiment, RunOutput, RunSeries, RunStats, Violation};
pub use store::{BlockStore, Manifest, StoreError};
pub use verify::{read_chain_dump, replay, verify_chain, write_chain_dump, DumpRecord, VerifyError, VerifyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("cannot write {}: {reason}", path.display())]
    OutputUnwritable { path: PathBuf, reason: String },
    #[error("{count} invariant violation(s); first: {first}")]
    InvariantViolation { count: usize, first: String },
    #[error("no metric rows to report")]
    EmptySeries,
    #[error(transparent)]
    Verify(#[from] VerifyError),
}
