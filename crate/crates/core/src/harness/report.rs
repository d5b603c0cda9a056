//! Aggregation of run series into per-configuration tables and plot-ready CSVs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::supply_slope;
use super::run::{write_csv, RunSeries};
use super::HarnessError;

/// Count, sum and sum of squares; merging is associative and order-independent
/// up to floating-point rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accum {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl Accum {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, o: &Accum) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    pub fn summary(&self) -> Stat {
        if self.n == 0 {
            return Stat { n: 0, mean: 0.0, ci_low: 0.0, ci_high: 0.0 };
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let half = if self.n < 2 {
            0.0
        } else {
            let var = ((self.sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
            1.96 * (var / n).sqrt()
        };
        Stat { n: self.n, mean, ci_low: mean - half, ci_high: mean + half }
    }
}

/// Mean with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: u64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub nodes: usize,
    pub problem_rate_in: f64,
    pub tx_rate_in: f64,
    pub burn_ratio: f64,
    pub runs: usize,
    pub block_rate: Stat,
    pub problem_rate: Stat,
    pub tx_rate: Stat,
    pub utilization: Stat,
    /// Per-run supply slope (tokens per tick).
    pub supply_slope: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub configs: Vec<ConfigSummary>,
}

#[derive(Default)]
struct Group {
    nodes: usize,
    problem_rate_in: f64,
    tx_rate_in: f64,
    burn_ratio: f64,
    runs: usize,
    block: Accum,
    problem: Accum,
    tx: Accum,
    util: Accum,
    slope: Accum,
}

fn key(s: &RunSeries) -> String {
    let c = &s.config;
    format!("{:08}|{:.6}|{:.6}|{:08}", c.nodes, c.workload.problem_rate, c.workload.tx_rate, c.chain.burn_ratio.ppm())
}

/// Groups runs by (nodes, problem rate, tx rate, burn ratio) and summarizes every window.
pub fn report(series: &[RunSeries]) -> Result<Report, HarnessError> {
    if series.iter().all(|s| s.rows.is_empty()) {
        return Err(HarnessError::EmptySeries);
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for s in series.iter().filter(|s| !s.rows.is_empty()) {
        let g = groups.entry(key(s)).or_default();
        g.nodes = s.config.nodes;
        g.problem_rate_in = s.config.workload.problem_rate;
        g.tx_rate_in = s.config.workload.tx_rate;
        g.burn_ratio = s.config.chain.burn_ratio.as_f64();
        g.runs += 1;
        for r in &s.rows {
            g.block.push(r.block_rate);
            g.problem.push(r.problem_rate);
            g.tx.push(r.tx_rate);
            g.util.push(r.utilization);
        }
        if let Some(slope) = supply_slope(&s.rows) {
            g.slope.push(slope);
        }
    }
    let configs = groups
        .into_values()
        .map(|g| ConfigSummary {
            nodes: g.nodes,
            problem_rate_in: g.problem_rate_in,
            tx_rate_in: g.tx_rate_in,
            burn_ratio: g.burn_ratio,
            runs: g.runs,
            block_rate: g.block.summary(),
            problem_rate: g.problem.summary(),
            tx_rate: g.tx.summary(),
            utilization: g.util.summary(),
            supply_slope: g.slope.summary(),
        })
        .collect();
    Ok(Report { configs })
}

#[derive(Serialize)]
struct AxisRow {
    nodes: usize,
    problem_rate_in: f64,
    burn_ratio: f64,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Serialize)]
struct SupplyRow {
    run: usize,
    burn_ratio: f64,
    tick: u64,
    height: u64,
    supply: i128,
    minted: u64,
    burned: u64,
}

#[derive(Serialize)]
struct DeltaRow {
    run: usize,
    burn_ratio: f64,
    height: u64,
    timestamp: u64,
    kind: &'static str,
    reward: u64,
    supply_delta: i128,
    supply: i128,
}

#[derive(Serialize)]
struct SummaryRow {
    nodes: usize,
    problem_rate_in: f64,
    tx_rate_in: f64,
    burn_ratio: f64,
    runs: usize,
    block_rate: f64,
    problem_rate: f64,
    tx_rate: f64,
    utilization: f64,
    supply_slope: f64,
}

/// Writes `summary.csv`, one CSV per plotted axis, and `report.json` into `dir`.
pub fn write_report(dir: &Path, report: &Report, series: &[RunSeries]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::OutputUnwritable { path: dir.into(), reason: e.to_string() })?;
    let axis = |f: fn(&ConfigSummary) -> Stat| -> Vec<AxisRow> {
        report
            .configs
            .iter()
            .map(|c| {
                let s = f(c);
                AxisRow { nodes: c.nodes, problem_rate_in: c.problem_rate_in, burn_ratio: c.burn_ratio, mean: s.mean, ci_low: s.ci_low, ci_high: s.ci_high }
            })
            .collect()
    };
    write_csv(&dir.join("block_rate.csv"), &axis(|c| c.block_rate))?;
    write_csv(&dir.join("problem_rate.csv"), &axis(|c| c.problem_rate))?;
    write_csv(&dir.join("tx_rate.csv"), &axis(|c| c.tx_rate))?;
    write_csv(&dir.join("utilization.csv"), &axis(|c| c.utilization))?;
    let summary: Vec<SummaryRow> = report
        .configs
        .iter()
        .map(|c| SummaryRow {
            nodes: c.nodes,
            problem_rate_in: c.problem_rate_in,
            tx_rate_in: c.tx_rate_in,
            burn_ratio: c.burn_ratio,
            runs: c.runs,
            block_rate: c.block_rate.mean,
            problem_rate: c.problem_rate.mean,
            tx_rate: c.tx_rate.mean,
            utilization: c.utilization.mean,
            supply_slope: c.supply_slope.mean,
        })
        .collect();
    write_csv(&dir.join("summary.csv"), &summary)?;

    let mut supply = Vec::new();
    let mut deltas = Vec::new();
    for (run, s) in series.iter().enumerate() {
        let k = s.config.chain.burn_ratio.as_f64();
        supply.extend(s.rows.iter().map(|r| SupplyRow {
            run,
            burn_ratio: k,
            tick: r.end,
            height: r.height,
            supply: r.supply,
            minted: r.minted,
            burned: r.burned,
        }));
        deltas.extend(s.deltas.iter().map(|d| DeltaRow {
            run,
            burn_ratio: k,
            height: d.height,
            timestamp: d.timestamp,
            kind: if d.system { "system" } else { "user" },
            reward: d.reward,
            supply_delta: d.delta,
            supply: d.supply,
        }));
    }
    write_csv(&dir.join("supply.csv"), &supply)?;
    write_csv(&dir.join("supply_delta.csv"), &deltas)?;
    let p = dir.join("report.json");
    std::fs::write(&p, serde_json::to_vec_pretty(report).expect("report serializes"))
        .map_err(|e| HarnessError::OutputUnwritable { path: p, reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accum_merge_matches_single_pass() {
        let xs = [0.5, 1.5, 2.0, 7.25, 3.0];
        let mut all = Accum::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Accum::default(), Accum::default());
        xs[..2].iter().for_each(|&x| a.push(x));
        xs[2..].iter().for_each(|&x| b.push(x));
        b.merge(&a);
        let (s1, s2) = (all.summary(), b.summary());
        assert_eq!(s1.n, s2.n);
        assert!((s1.mean - s2.mean).abs() < 1e-12);
        assert!((s1.ci_high - s2.ci_high).abs() < 1e-9);
    }

    #[test]
    fn single_value_has_zero_width() {
        let mut a = Accum::default();
        a.push(4.0);
        let s = a.summary();
        assert_eq!((s.mean, s.ci_low, s.ci_high), (4.0, 4.0, 4.0));
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(report(&[]), Err(HarnessError::EmptySeries)));
    }
}
