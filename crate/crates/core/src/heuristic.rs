//! Rounding heuristic that turns a master LP point into a feasible cover.

use crate::instance::{CoverInstance, IndexMaps, ScenarioSet};
use crate::solver::{check_feasible, FEASIBILITY_SLACK};

/// Builds a feasible `x` from the master point `(x*, v*)`, or `None` if even
/// covering every row fails the chance constraint.
///
/// Rows are taken in decreasing `v*` until the probability of the chosen set
/// reaches `1 - eps`; the chosen rows are covered greedily by cost per newly
/// covered row (columns at `x* = 1` first), and columns whose removal keeps
/// the constraint satisfied are then dropped, most expensive first.
pub fn round_master_point(
    inst: &CoverInstance,
    scen: &ScenarioSet,
    idx: &IndexMaps,
    eps: f64,
    x_star: &[f64],
    v_star: &[f64],
) -> Option<Vec<bool>> {
    let target = 1.0 - eps - FEASIBILITY_SLACK;
    let mut order: Vec<usize> = (0..inst.m).collect();
    order.sort_by(|&a, &b| v_star[b].total_cmp(&v_star[a]).then(a.cmp(&b)));

    // per-scenario count of rows still missing, per-block covered mass
    let mut missing: Vec<Vec<usize>> = scen.blocks.iter().map(|b| b.scenarios.iter().map(Vec::len).collect()).collect();
    let mut mass: Vec<f64> = scen.blocks.iter().map(|b| b.satisfied_mass).collect();
    let mut chosen = vec![false; inst.m];
    let mut reached = mass.iter().product::<f64>() >= target;
    for &k in &order {
        if reached {
            break;
        }
        chosen[k] = true;
        let t = scen.partition.block_of(k);
        let l = scen.partition.local_index(k);
        for &i in &idx.blocks[t].scenarios_of_row[l] {
            missing[t][i] -= 1;
            if missing[t][i] == 0 {
                mass[t] += scen.blocks[t].prob[i];
            }
        }
        reached = mass.iter().product::<f64>() >= target;
    }

    let mut x = cover_rows(inst, &chosen, x_star);
    if !check_feasible(&x, inst, scen, eps).feasible {
        // rounding drift in the running product; fall back to the full cover
        x = cover_rows(inst, &vec![true; inst.m], x_star);
        if !check_feasible(&x, inst, scen, eps).feasible {
            return None;
        }
    }

    let mut used: Vec<usize> = (0..inst.n).filter(|&j| x[j]).collect();
    used.sort_by(|&a, &b| inst.cost[b].cmp(&inst.cost[a]).then(a.cmp(&b)));
    for j in used {
        x[j] = false;
        if !check_feasible(&x, inst, scen, eps).feasible {
            x[j] = true;
        }
    }
    Some(x)
}

/// Greedy cover of the rows flagged in `need`.
fn cover_rows(inst: &CoverInstance, need: &[bool], x_star: &[f64]) -> Vec<bool> {
    let mut x: Vec<bool> = x_star.iter().map(|&a| a >= 1.0 - 1e-6).collect();
    let mut rows_of_col = vec![Vec::new(); inst.n];
    for (k, cols) in inst.cover.iter().enumerate() {
        if need[k] {
            for &j in cols {
                rows_of_col[j].push(k);
            }
        }
    }
    let covered = inst.covered_rows(&x);
    let mut open: Vec<bool> = (0..inst.m).map(|k| need[k] && !covered[k]).collect();
    let mut left = open.iter().filter(|&&o| o).count();
    while left > 0 {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..inst.n).filter(|&j| !x[j]) {
            let gain = rows_of_col[j].iter().filter(|&&k| open[k]).count();
            if gain == 0 {
                continue;
            }
            let ratio = inst.cost[j] as f64 / gain as f64;
            if best.is_none_or(|(_, r)| ratio < r) {
                best = Some((j, ratio));
            }
        }
        let (j, _) = best.expect("every row has a covering column");
        x[j] = true;
        for &k in &rows_of_col[j] {
            if open[k] {
                open[k] = false;
                left -= 1;
            }
        }
    }
    x
}
