//! CrowdMine: a blockchain whose mining work is user-proposed computation.
//!
//! The crate contains the protocol library (ledger, consensus, crowdwork, miner),
//! a deterministic network simulator, attack strategies, and the experiment harness
//! behind the `crowdmine` binary.

pub mod crowdwork;
pub mod ledger;
pub mod consensus;
pub mod miner;
pub mod netsim;
pub mod adversary;
pub mod harness;
