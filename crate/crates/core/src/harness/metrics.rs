//! Per-window throughput, utilization and supply rows, plus per-block supply deltas.
//!
//! Rows are binned by block timestamp over the final main chain, so a block that was
//! later orphaned never counts. Utilization comes from step counters at window edges.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ledger::{Block, ChainState};
use crate::miner::StepCounters;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub start: u64,
    pub end: u64,
    pub blocks: u64,
    pub user_blocks: u64,
    pub txs: u64,
    /// Main-chain blocks per tick.
    pub block_rate: f64,
    /// User problems settled per tick.
    pub problem_rate: f64,
    /// Main-chain transactions per tick.
    pub tx_rate: f64,
    pub user_steps: u64,
    pub total_steps: u64,
    /// Share of all steps spent searching user problems.
    pub utilization: f64,
    /// Main-chain height and ledger totals as of the last block stamped before `end`.
    pub height: u64,
    pub supply: i128,
    pub minted: u64,
    pub burned: u64,
    pub locked: u64,
}

/// Supply change caused by one main-chain block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDelta {
    pub height: u64,
    pub timestamp: u64,
    pub system: bool,
    pub reward: u64,
    pub delta: i128,
    pub supply: i128,
}

/// Summed counters across nodes at each window edge, keyed by tick.
pub type CounterSnapshots = BTreeMap<u64, StepCounters>;

/// Builds rows for `[0, ticks)` in windows of `window` ticks.
///
/// `blocks` is the main chain without genesis and `states[h]` the state after height `h`.
pub fn compute_series(
    blocks: &[Arc<Block>],
    states: &[ChainState],
    counters: &CounterSnapshots,
    ticks: u64,
    window: u64,
) -> Result<Vec<MetricsSample>, String> {
    if states.len() != blocks.len() + 1 {
        return Err(format!("{} states for {} blocks", states.len(), blocks.len()));
    }
    let mut rows = Vec::new();
    let mut next = 0usize;
    let mut start = 0u64;
    while start < ticks {
        let end = (start + window).min(ticks);
        let (mut n, mut user, mut txs) = (0u64, 0u64, 0u64);
        while next < blocks.len() && blocks[next].header.timestamp < end {
            let b = &blocks[next];
            n += 1;
            user += !b.header.problem_ref.is_system() as u64;
            txs += b.txs.len() as u64;
            next += 1;
        }
        let at = |t: u64| -> Result<StepCounters, String> {
            if t == 0 {
                return Ok(StepCounters::default());
            }
            counters.get(&t).copied().ok_or_else(|| format!("no counter snapshot at tick {t}"))
        };
        let steps = at(end)?.since(&at(start)?);
        let span = (end - start) as f64;
        let st = &states[next];
        rows.push(MetricsSample {
            start,
            end,
            blocks: n,
            user_blocks: user,
            txs,
            block_rate: n as f64 / span,
            problem_rate: user as f64 / span,
            tx_rate: txs as f64 / span,
            user_steps: steps.user,
            total_steps: steps.total(),
            utilization: if steps.total() == 0 { 0.0 } else { steps.user as f64 / steps.total() as f64 },
            height: st.height(),
            supply: st.total_supply(),
            minted: st.minted().0,
            burned: st.burned().0,
            locked: st.locked_total().0,
        });
        start = end;
    }
    Ok(rows)
}

/// Supply delta of each main-chain block, read off consecutive replayed states.
pub fn supply_deltas(blocks: &[Arc<Block>], states: &[ChainState]) -> Vec<BlockDelta> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, b)| BlockDelta {
            height: b.height(),
            timestamp: b.header.timestamp,
            system: b.header.problem_ref.is_system(),
            reward: b.reward().0,
            delta: states[i + 1].total_supply() - states[i].total_supply(),
            supply: states[i + 1].total_supply(),
        })
        .collect()
}

/// Ordinary least-squares slope of supply against window end tick.
pub fn supply_slope(rows: &[MetricsSample]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let n = rows.len() as f64;
    let mx = rows.iter().map(|r| r.end as f64).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.supply as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in rows {
        let dx = r.end as f64 - mx;
        sxy += dx * (r.supply as f64 - my);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}
