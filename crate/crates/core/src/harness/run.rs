use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_series, supply_deltas, BlockDelta, CounterSnapshots, MetricsSample};
use super::store::{BlockStore, Manifest};
use super::verify::{read_chain_dump, replay, write_chain_dump};
use super::{ExperimentConfig, HarnessError};
use crate::ledger::{block_supply_delta, Amount, Block, Genesis, Keypair};
use crate::miner::{Miner, MinerConfig, MinerEvent, StepCounters};
use crate::netsim::{read_jsonl_gz, MessageStats, SimNode, Simulation, TraceRecord, Workload};

pub const CONFIG_FILE: &str = "config.json";
pub const CHAIN_FILE: &str = "chain.jsonl";
pub const TRACE_FILE: &str = "trace.jsonl.gz";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DELTAS_FILE: &str = "supply_deltas.csv";
pub const SERIES_FILE: &str = "series.json";
pub const INVARIANTS_FILE: &str = "invariants.json";

/// A failed online check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tick: u64,
    pub node: Option<usize>,
    pub check: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub main_height: u64,
    /// Blocks node 0 saw that are not on its final main chain.
    pub orphaned: u64,
    pub reorgs: u64,
    pub problems_generated: u64,
    pub family_counts: [u64; 3],
    pub transfers_generated: u64,
    pub messages: MessageStats,
    pub checks: u64,
}

/// What `report` consumes: one run's rows, block deltas and bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub config: ExperimentConfig,
    /// Ticks actually simulated; a multiple of the window.
    pub ticks: u64,
    pub rows: Vec<MetricsSample>,
    pub deltas: Vec<BlockDelta>,
    pub stats: RunStats,
}

pub struct RunOutput {
    pub series: RunSeries,
    pub genesis: Genesis,
    pub main_chain: Vec<Arc<Block>>,
    pub counters: CounterSnapshots,
    pub violations: Vec<Violation>,
}

impl RunOutput {
    /// `Ok` iff every online check passed.
    pub fn check(&self) -> Result<(), HarnessError> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(HarnessError::InvariantViolation {
                count: self.violations.len(),
                first: format!("tick {} node {:?} {}: {}", v.tick, v.node, v.check, v.detail),
            }),
        }
    }
}

pub fn miner_key(i: usize, seed: u64) -> Keypair {
    Keypair::derive(&format!("miner-{i}-{seed}"))
}

pub fn genesis_for(cfg: &ExperimentConfig) -> Genesis {
    let mut alloc = cfg.workload.allocations();
    alloc.extend((0..cfg.nodes).map(|i| (miner_key(i, cfg.seed).address(), Amount::ZERO)));
    Genesis::new(alloc)
}

pub fn build_simulation(cfg: &ExperimentConfig, genesis: &Genesis) -> Simulation {
    let chain = Arc::new(cfg.chain.clone());
    let nodes: Vec<Box<dyn SimNode>> = (0..cfg.nodes)
        .map(|i| {
            let mc = MinerConfig { power: cfg.power, solve_budget: cfg.solve_budget, selection: cfg.selection, ..MinerConfig::default() };
            let seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            Box::new(Miner::new(i, miner_key(i, cfg.seed), mc, chain.clone(), genesis, seed)) as Box<dyn SimNode>
        })
        .collect();
    let workload = Workload::new(cfg.workload.clone(), chain, cfg.seed ^ 0x5757_5757);
    Simulation::new(nodes, cfg.network.clone(), Some(workload), cfg.seed)
        .with_trace(cfg.trace)
        .with_samples(cfg.sample_interval)
}

fn unwritable(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::OutputUnwritable { path: path.to_path_buf(), reason: e.to_string() }
}

/// Runs one experiment. Outputs are written even when a check fails; the violations are
/// in the result and in `invariants.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let genesis = genesis_for(cfg);
    let mut store = match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(unwritable(dir))?;
            let manifest = Manifest::new(genesis.block().hash(), cfg.digest());
            Some(BlockStore::open(dir, &manifest).map_err(|e| HarnessError::OutputUnwritable { path: dir.clone(), reason: e.to_string() })?)
        }
        None => None,
    };
    let mut sim = build_simulation(cfg, &genesis);
    let mut violations = Vec::new();
    let mut counters = CounterSnapshots::new();
    let mut checks = 0u64;
    let mut persisted = 0u64;

    let persist = |sim: &Simulation, store: &mut Option<BlockStore>, persisted: &mut u64| -> Result<(), HarnessError> {
        if let Some(s) = store {
            let tree = sim.nodes()[0].view().tree();
            for n in tree.arrived_since(*persisted) {
                s.put(&n.block).map_err(|e| HarnessError::OutputUnwritable { path: PathBuf::from(super::store::STORE_FILE), reason: e.to_string() })?;
            }
            *persisted = tree.next_seq();
        }
        Ok(())
    };

    while sim.tick() < cfg.ticks {
        sim.step();
        let t = sim.tick();
        if t % cfg.sample_interval != 0 {
            continue;
        }
        let mut sum = StepCounters::default();
        for (i, n) in sim.nodes().iter().enumerate() {
            let c = n.counters();
            sum.add(&c);
            checks += 2;
            if c.total() != cfg.power * t {
                violations.push(Violation {
                    tick: t,
                    node: Some(i),
                    check: "step accounting".into(),
                    detail: format!("{} steps after {t} ticks at power {}", c.total(), cfg.power),
                });
            }
            let gap = n.view().tip_state().conservation_gap();
            if gap != 0 {
                violations.push(Violation { tick: t, node: Some(i), check: "conservation".into(), detail: format!("gap {gap}") });
            }
        }
        counters.insert(t, sum);
        if t % cfg.window == 0 {
            persist(&sim, &mut store, &mut persisted)?;
            if cfg.max_blocks.is_some_and(|m| sim.nodes()[0].view().height() >= m) {
                break;
            }
        }
    }
    let ticks = sim.tick();
    sim.quiesce();
    persist(&sim, &mut store, &mut persisted)?;

    let view = sim.nodes()[0].view();
    let main_chain: Vec<Arc<Block>> = view.main_blocks().cloned().collect();
    let states = match replay(&genesis, &main_chain, &cfg.chain) {
        Ok(r) => r.states,
        Err(e) => {
            violations.push(Violation { tick: ticks, node: Some(0), check: "replay".into(), detail: e.to_string() });
            return Err(HarnessError::InvariantViolation { count: violations.len(), first: e.to_string() });
        }
    };
    let rows = compute_series(&main_chain, &states, &counters, ticks, cfg.window).map_err(|m| HarnessError::InvariantViolation { count: 1, first: m })?;
    let deltas = supply_deltas(&main_chain, &states);
    for (d, b) in deltas.iter().zip(&main_chain) {
        checks += 1;
        let expected = block_supply_delta(b, cfg.chain.burn_ratio);
        if d.delta != expected {
            violations.push(Violation {
                tick: ticks,
                node: None,
                check: "block supply delta".into(),
                detail: format!("height {}: ledger {} vs reward arithmetic {expected}", d.height, d.delta),
            });
        }
    }
    for r in &rows {
        checks += 1;
        let gap = states[r.height as usize].conservation_gap();
        if gap != 0 {
            violations.push(Violation { tick: r.end, node: None, check: "row conservation".into(), detail: format!("gap {gap}") });
        }
    }

    let wl = sim.workload().expect("harness always attaches a workload");
    let reorgs = sim.events().iter().filter(|(n, e)| *n == 0 && matches!(e, MinerEvent::Reorg { .. })).count() as u64;
    let stats = RunStats {
        main_height: view.height(),
        orphaned: view.tree().len() as u64 - 1 - view.height(),
        reorgs,
        problems_generated: wl.problems_generated,
        family_counts: wl.family_counts,
        transfers_generated: wl.transfers_generated,
        messages: sim.message_stats(),
        checks,
    };
    let series = RunSeries { config: cfg.clone(), ticks, rows, deltas, stats };
    let out = RunOutput { series, genesis, main_chain, counters, violations };

    if let Some(dir) = &cfg.out {
        if let Some(s) = &mut store {
            s.flush().map_err(|e| HarnessError::OutputUnwritable { path: dir.clone(), reason: e.to_string() })?;
        }
        write_outputs(dir, &out)?;
        if cfg.trace {
            let p = dir.join(TRACE_FILE);
            sim.trace().write_jsonl_gz(&p).map_err(unwritable(&p))?;
        }
    }
    Ok(out)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(unwritable(path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), v).map_err(|e| HarnessError::OutputUnwritable { path: path.into(), reason: e.to_string() })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let err = |e: csv::Error| HarnessError::OutputUnwritable { path: path.into(), reason: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(unwritable(path))
}

fn write_outputs(dir: &Path, out: &RunOutput) -> Result<(), HarnessError> {
    write_json(&dir.join(CONFIG_FILE), &out.series.config)?;
    let p = dir.join(CHAIN_FILE);
    write_chain_dump(&p, &out.genesis, &out.main_chain).map_err(unwritable(&p))?;
    write_csv(&dir.join(METRICS_FILE), &out.series.rows)?;
    write_csv(&dir.join(DELTAS_FILE), &out.series.deltas)?;
    write_json(&dir.join(SERIES_FILE), &out.series)?;
    write_json(&dir.join(INVARIANTS_FILE), &serde_json::json!({
        "checks": out.series.stats.checks,
        "violations": out.violations,
    }))
}

/// Rebuilds rows and block deltas from an output directory's config, chain dump and
/// trace alone, without any live counters.
pub fn recompute_from_outputs(dir: &Path) -> Result<(Vec<MetricsSample>, Vec<BlockDelta>), HarnessError> {
    let cfg = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let (genesis, blocks) = read_chain_dump(&dir.join(CHAIN_FILE))?;
    let report = replay(&genesis, &blocks, &cfg.chain)?;
    let records = read_jsonl_gz(&dir.join(TRACE_FILE)).map_err(|e| HarnessError::ConfigInvalid(format!("trace: {e}")))?;
    let mut by_tick: BTreeMap<u64, StepCounters> = BTreeMap::new();
    for r in records {
        if let TraceRecord::Sample(s) = r {
            by_tick.entry(s.tick).or_default().add(&s.counters);
        }
    }
    let ticks = by_tick.keys().copied().filter(|t| t % cfg.window == 0).max().unwrap_or(0);
    let rows = compute_series(&blocks, &report.states, &by_tick, ticks, cfg.window).map_err(HarnessError::ConfigInvalid)?;
    Ok((rows, supply_deltas(&blocks, &report.states)))
}
