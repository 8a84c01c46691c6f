//! Probability-threshold row fixing.
//!
//! If the scenarios needing row `k` carry more than `eps` of a block's
//! probability, leaving `k` uncovered caps that block's probability below
//! `1 - eps`. Every block factor of a feasible product must reach `1 - eps`,
//! so such rows are covered in every feasible solution.

use crate::instance::{IndexMaps, ScenarioSet};

/// Slack matching the feasibility check, so that a row is only fixed when
/// uncovering it fails that check too.
pub const FIX_SLACK: f64 = 1e-12;

/// Rows of block `t` with `p(S^t_k) > eps`, ascending by global id.
fn forced_in_block(t: usize, idx: &IndexMaps, scen: &ScenarioSet, eps: f64) -> Vec<usize> {
    let prob = &scen.blocks[t].prob;
    let block = &idx.blocks[t];
    block
        .scenarios_of_row
        .iter()
        .enumerate()
        .filter(|(_, set)| set.iter().map(|&i| prob[i]).sum::<f64>() > eps + FIX_SLACK)
        .map(|(l, _)| block.rows[l])
        .collect()
}

/// Forced rows for single-block data.
pub fn fix_forced_rows(idx: &IndexMaps, scen: &ScenarioSet, eps: f64) -> Vec<usize> {
    debug_assert_eq!(scen.num_blocks(), 1);
    forced_in_block(0, idx, scen, eps)
}

/// Forced rows of every block, ascending.
pub fn block_forced_rows(idx: &IndexMaps, scen: &ScenarioSet, eps: f64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..scen.num_blocks())
        .flat_map(|t| forced_in_block(t, idx, scen, eps))
        .collect();
    rows.sort_unstable();
    rows
}
