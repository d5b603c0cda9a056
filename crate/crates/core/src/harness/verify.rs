//! Chain dumps (JSON lines, genesis first) and their offline replay.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{validate_block, Rejection, ValidationContext};
use crate::ledger::{Block, ChainConfig, ChainState, Genesis, Hash256};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("dump i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt dump at line {line}: {reason}")]
    CorruptDump { line: usize, reason: String },
    #[error("block at height {height} fails validation: {reason}")]
    ValidationFailure { height: u64, reason: Rejection },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DumpRecord {
    Genesis(Genesis),
    Block(Arc<Block>),
}

pub fn write_chain_dump<'a>(
    path: &Path,
    genesis: &Genesis,
    blocks: impl IntoIterator<Item = &'a Arc<Block>>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &DumpRecord::Genesis(genesis.clone()))?;
    w.write_all(b"\n")?;
    for b in blocks {
        if b.height() == 0 {
            continue;
        }
        serde_json::to_writer(&mut w, &DumpRecord::Block(b.clone()))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Parses a dump; structural problems only, no protocol checks.
pub fn read_chain_dump(path: &Path) -> Result<(Genesis, Vec<Arc<Block>>), VerifyError> {
    let r = BufReader::new(File::open(path)?);
    let mut genesis = None;
    let mut blocks = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DumpRecord =
            serde_json::from_str(&line).map_err(|e| VerifyError::CorruptDump { line: lineno, reason: e.to_string() })?;
        match (rec, &genesis) {
            (DumpRecord::Genesis(g), None) if blocks.is_empty() => genesis = Some(g),
            (DumpRecord::Genesis(_), _) => {
                return Err(VerifyError::CorruptDump { line: lineno, reason: "genesis record must come first, once".into() })
            }
            (DumpRecord::Block(b), Some(_)) => blocks.push(b),
            (DumpRecord::Block(_), None) => {
                return Err(VerifyError::CorruptDump { line: lineno, reason: "block before genesis".into() })
            }
        }
    }
    let genesis = genesis.ok_or(VerifyError::CorruptDump { line: 0, reason: "no genesis record".into() })?;
    Ok((genesis, blocks))
}

/// Outcome of a successful replay.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub height: u64,
    pub tip: Hash256,
    /// State after each height, genesis at index 0.
    pub states: Vec<ChainState>,
}

impl VerifyReport {
    pub fn final_state(&self) -> &ChainState {
        self.states.last().expect("genesis state is always present")
    }
}

/// Replays genesis to tip through full validation; stops at the first bad block.
pub fn replay(genesis: &Genesis, blocks: &[Arc<Block>], cfg: &ChainConfig) -> Result<VerifyReport, VerifyError> {
    let state = ChainState::genesis(genesis).map_err(|e| VerifyError::CorruptDump { line: 1, reason: e.to_string() })?;
    let gblock = genesis.block();
    let mut states = vec![state];
    let mut parent_header = gblock.header.clone();
    for (i, b) in blocks.iter().enumerate() {
        // Heights come from position, so a dropped or reordered block fails at its slot.
        let height = i as u64 + 1;
        let parent_state = states.last().unwrap();
        let ctx = ValidationContext { parent_state, parent_header: &parent_header, config: cfg, now: None };
        let next = validate_block(b, &ctx).verdict.map_err(|reason| VerifyError::ValidationFailure { height, reason })?;
        states.push(next);
        parent_header = b.header.clone();
    }
    let last = states.last().unwrap();
    Ok(VerifyReport { height: last.height(), tip: last.tip(), states })
}

pub fn verify_chain(dump: &Path, cfg: &ChainConfig) -> Result<VerifyReport, VerifyError> {
    let (genesis, blocks) = read_chain_dump(dump)?;
    replay(&genesis, &blocks, cfg)
}
