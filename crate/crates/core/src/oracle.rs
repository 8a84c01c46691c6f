//! Brute-force references used to validate the solver and the separators.

use pscp_lp::{solve_lp, LpModel, LpStatus, Sense};

use crate::error::{PscpError, Result};
use crate::instance::{CoverInstance, IndexMaps, ScenarioSet};
use crate::solver::{check_feasible, FEASIBILITY_SLACK};

pub const ENUMERATION_MAX_N: usize = 24;
pub const EXTENSIVE_MAX_N: usize = 12;
pub const EXTENSIVE_MAX_S: usize = 40;
pub const LP_ORACLE_MAX_S: usize = 10_000;
pub const PATTERN_MAX_M: usize = 20;

fn guard(what: &'static str, value: usize, limit: usize) -> Result<()> {
    if value > limit {
        Err(PscpError::Guard { what, value, limit })
    } else {
        Ok(())
    }
}

/// Walks `{0,1}^n` in lexicographic order (`x_1` most significant).
fn for_each_binary(n: usize, mut f: impl FnMut(&[bool])) {
    let mut x = vec![false; n];
    loop {
        f(&x);
        match x.iter().rposition(|&b| !b) {
            Some(j) => {
                x[j] = true;
                x[j + 1..].iter_mut().for_each(|b| *b = false);
            }
            None => return,
        }
    }
}

/// Minimum cost and the lexicographically smallest optimal `x`, by scanning
/// all `2^n` vectors; `None` if no vector is feasible.
pub fn enumerate_optimal(inst: &CoverInstance, scen: &ScenarioSet, eps: f64) -> Result<Option<(u64, Vec<bool>)>> {
    guard("column count", inst.n, ENUMERATION_MAX_N)?;
    let mut best: Option<(u64, Vec<bool>)> = None;
    for_each_binary(inst.n, |x| {
        let cost = inst.cost_of(x);
        if best.as_ref().is_some_and(|(c, _)| cost >= *c) {
            return;
        }
        if check_feasible(x, inst, scen, eps).feasible {
            best = Some((cost, x.to_vec()));
        }
    });
    Ok(best)
}

/// Shortfall of the chance constraint at `v*`, from the LP
/// `max sum_i p_i z_i` over `z in [0,1]^s` with `z_i <= v*_k` for every row
/// `k` of scenario `i`. Single-block data only.
pub fn lp_psi_oracle(v: &[f64], eps: f64, idx: &IndexMaps, scen: &ScenarioSet) -> Result<f64> {
    if scen.num_blocks() != 1 {
        return Err(PscpError::Invalid("the LP oracle needs single-block data".into()));
    }
    let b = &scen.blocks[0];
    guard("scenario count", b.len(), LP_ORACLE_MAX_S)?;
    let block = &idx.blocks[0];
    let mut model = LpModel::new();
    for &p in &b.prob {
        model.add_var(0.0, 1.0, -p);
    }
    for (i, rows) in block.rows_of_scenario.iter().enumerate() {
        for &l in rows {
            model.add_row(vec![(i, 1.0)], Sense::Le, v[block.rows[l]]);
        }
    }
    let res = solve_lp(&model)?;
    if res.status != LpStatus::Optimal {
        return Err(PscpError::Lp(format!("oracle LP ended with {:?}", res.status)));
    }
    Ok((1.0 - eps) - b.satisfied_mass + res.objective)
}

/// Optimum of the extensive formulation with the scenario indicators `z`
/// either binary or relaxed to `[0, 1]`.
///
/// For each `x`, `v` is taken maximal (the covered rows) and `z` at its
/// largest feasible value `min_{k in M_i} v_k` (rounded down when binary).
/// A single block uses the linear constraint `sum p z >= 1 - eps - mass`;
/// several blocks use `sum_t ln(mass_t + sum_i p_it z_it) >= ln(1 - eps)`.
pub fn extensive_form_optimal(
    inst: &CoverInstance,
    scen: &ScenarioSet,
    eps: f64,
    binary_z: bool,
) -> Result<Option<u64>> {
    guard("column count", inst.n, EXTENSIVE_MAX_N)?;
    for b in &scen.blocks {
        guard("scenario count", b.len(), EXTENSIVE_MAX_S)?;
    }
    let single = scen.num_blocks() == 1;
    let mut best: Option<u64> = None;
    for_each_binary(inst.n, |x| {
        let cost = inst.cost_of(x);
        if best.is_some_and(|c| cost >= c) {
            return;
        }
        let v: Vec<f64> = inst.covered_rows(x).iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let block_mass = |t: usize| -> f64 {
            let b = &scen.blocks[t];
            b.scenarios
                .iter()
                .zip(&b.prob)
                .map(|(rows, &p)| {
                    let z = rows.iter().map(|&k| v[k]).fold(1.0, f64::min);
                    let z = if binary_z { z.floor() } else { z };
                    p * z
                })
                .sum()
        };
        let feasible = if single {
            block_mass(0) >= (1.0 - eps) - scen.blocks[0].satisfied_mass - FEASIBILITY_SLACK
        } else {
            let log_prob: f64 = (0..scen.num_blocks())
                .map(|t| (scen.blocks[t].satisfied_mass + block_mass(t)).ln())
                .sum();
            log_prob >= (1.0 - eps).ln() - FEASIBILITY_SLACK
        };
        if feasible {
            best = Some(cost);
        }
    });
    Ok(best)
}

/// Every `v in {0,1}^m` whose block probabilities multiply to at least
/// `1 - eps`, i.e. every `v` part of a feasible master point.
pub fn feasible_patterns(scen: &ScenarioSet, eps: f64) -> Result<Vec<Vec<bool>>> {
    guard("row count", scen.m(), PATTERN_MAX_M)?;
    let mut out = Vec::new();
    for_each_binary(scen.m(), |v| {
        if crate::solver::coverage_probability(v, scen) >= 1.0 - eps - FEASIBILITY_SLACK {
            out.push(v.to_vec());
        }
    });
    Ok(out)
}
