//! Block validity, the PoCW and system-puzzle rules, and maximum-aggregated-value fork choice.

pub mod chain;
pub mod pocw;
pub mod tree;
pub mod validate;

pub use chain::{ChainUpdate, ChainView, InsertError, SNAPSHOT_INTERVAL};
pub use pocw::{pocw_check, pocw_threshold, scan_nonces, system_puzzle_check, PocwResult};
pub use tree::{BlockTree, TreeError, TreeNode};
pub use validate::{validate_block, Rejection, ValidationContext, ValidationReport};
