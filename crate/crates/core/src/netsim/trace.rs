use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::event::NodeId;
use crate::ledger::Hash256;
use crate::miner::{MinerEvent, StepCounters};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Inject { tick: u64, hash: Hash256, payload: String },
    Send { tick: u64, from: NodeId, hash: Hash256, payload: String },
    Drop { tick: u64, from: NodeId, to: NodeId, hash: Hash256 },
    Node { node: NodeId, event: MinerEvent },
    Sample(NodeSample),
}

/// Periodic snapshot of one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSample {
    pub tick: u64,
    pub node: NodeId,
    pub height: u64,
    pub tip: Hash256,
    pub state_digest: Hash256,
    pub counters: StepCounters,
}

/// In-memory trace buffer; recording is a no-op when disabled.
#[derive(Default)]
pub struct Trace {
    enabled: bool,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Trace { enabled, records: Vec::new() }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn record(&mut self, rec: impl FnOnce() -> TraceRecord) {
        if self.enabled {
            self.records.push(rec());
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Writes gzip-compressed JSON lines.
    pub fn write_jsonl_gz(&self, path: &Path) -> io::Result<()> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(GzEncoder::new(file, Compression::fast()));
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        out.into_inner().map_err(|e| e.into_error())?.finish()?.sync_all()
    }
}

pub fn read_jsonl_gz(path: &Path) -> io::Result<Vec<TraceRecord>> {
    use std::io::BufRead;
    let reader = io::BufReader::new(flate2::read::GzDecoder::new(File::open(path)?));
    reader
        .lines()
        .map(|line| serde_json::from_str(&line?).map_err(io::Error::other))
        .collect()
}
