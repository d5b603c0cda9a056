use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::ledger::{sha256, ChainConfig, Hash256};
use crate::miner::SelectionKind;
use crate::netsim::{NetworkConfig, WorkloadConfig};

/// One experiment: network size, protocol parameters, demand and run length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nodes: usize,
    /// Steps per tick for every miner.
    pub power: u64,
    pub chain: ChainConfig,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    pub seed: u64,
    pub ticks: u64,
    /// Stop early once node 0's main chain reaches this height.
    #[serde(default)]
    pub max_blocks: Option<u64>,
    /// Metrics window in ticks; a multiple of `sample_interval`.
    pub window: u64,
    pub sample_interval: u64,
    pub selection: SelectionKind,
    pub solve_budget: u64,
    #[serde(default)]
    pub trace: bool,
    /// Output directory; `None` keeps everything in memory.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let chain = ChainConfig { verify_signatures: false, ..ChainConfig::default() };
        ExperimentConfig {
            nodes: 5,
            power: 64,
            chain,
            workload: WorkloadConfig::default(),
            network: NetworkConfig::default(),
            seed: 1,
            ticks: 10_000,
            max_blocks: None,
            window: 500,
            sample_interval: 100,
            selection: SelectionKind::Random,
            solve_budget: 2_000_000,
            trace: false,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        self.chain.validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        self.workload.validate().map_err(HarnessError::ConfigInvalid)?;
        if self.nodes == 0 {
            return bad("at least one node is required".into());
        }
        if self.power == 0 {
            return bad("power must be positive".into());
        }
        if self.ticks == 0 {
            return bad("run length must be positive".into());
        }
        if self.sample_interval == 0 || self.window == 0 || self.window % self.sample_interval != 0 {
            return bad(format!("window {} must be a positive multiple of sample interval {}", self.window, self.sample_interval));
        }
        if self.ticks % self.window != 0 {
            return bad(format!("run length {} must be a multiple of the window {}", self.ticks, self.window));
        }
        for p in &self.network.partitions {
            if p.groups.iter().flatten().any(|&n| n >= self.nodes) {
                return bad("partition names a node that does not exist".into());
            }
        }
        if self.network.latency.drop_rate.is_nan() || !(0.0..1.0).contains(&self.network.latency.drop_rate) {
            return bad("drop rate must be in [0, 1)".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Deep-merges a (possibly partial) JSON object over this config.
    pub fn overlay(&self, overlay: &Value) -> Result<Self, HarnessError> {
        let mut base = serde_json::to_value(self).expect("config serializes");
        merge(&mut base, overlay);
        serde_json::from_value(base).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    /// Hash of everything that determines the run's chain; the output path is excluded.
    pub fn digest(&self) -> Hash256 {
        let mut c = self.clone();
        c.out = None;
        c.trace = false;
        sha256(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
