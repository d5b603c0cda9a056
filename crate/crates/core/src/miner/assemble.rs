//! Candidate block construction.

use crate::ledger::{Address, Amount, Block, BlockHeader, ChainConfig, ChainState, Hash256, ProblemRef};

use super::mempool::Mempool;

/// Candidate block on top of `state` with transactions drawn from `mempool`.
///
/// `tx_root` is computed by [`Block::new`]; the caller varies timestamp or nonce.
#[allow(clippy::too_many_arguments)]
pub fn assemble_block(
    state: &ChainState,
    mempool: &Mempool,
    problem_ref: ProblemRef,
    reward: Amount,
    miner: &Address,
    timestamp: u64,
    cfg: &ChainConfig,
    max_txs: usize,
) -> Block {
    let height = state.height() + 1;
    let txs = mempool.select(state, reward, height, miner, cfg, max_txs);
    Block::new(
        BlockHeader {
            parent_hash: state.tip(),
            height,
            timestamp,
            miner: *miner,
            problem_ref,
            problem_reward: reward,
            tx_root: Hash256::ZERO,
        },
        txs,
    )
}
