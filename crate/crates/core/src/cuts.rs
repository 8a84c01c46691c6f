//! Closed-form subproblem values and feasibility cut separation.
//!
//! Both separators share one sweep: rows of a block are visited in
//! non-decreasing order of `v*` (ties by row index) and every scenario is
//! charged to the first visited row that covers it. The probability charged
//! to row `k` is its cut coefficient, and `sum_k a_k v*_k` equals
//! `sum_i p_i min_{k in M_i} v*_k`.

use std::fmt::{self, Write as _};

use crate::instance::{format_real, BlockIndex, IndexMaps, ScenarioSet};

/// Absolute violation a cut must exceed at a fractional point.
pub const SEPARATION_TOL: f64 = 1e-6;

/// Below this block probability (with no satisfied mass) the log-linearization
/// is numerically useless and the coverage inequality is tried first.
pub const DELTA_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutKind {
    Generic,
    Block,
    Coverage,
}

impl fmt::Display for CutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutKind::Generic => "generic",
            CutKind::Block => "block",
            CutKind::Coverage => "coverage",
        })
    }
}

/// A `>=` inequality over the master's `v` (and one `eta_t`) variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BendersCut {
    pub kind: CutKind,
    /// Nonzero `(row, a_k)` pairs, ascending by row.
    pub rows: Vec<(usize, f64)>,
    /// `(t, coefficient)` of the block variable, block cuts only.
    pub eta: Option<(usize, f64)>,
    pub rhs: f64,
    /// Node id and separation round that produced the cut.
    pub origin: (usize, usize),
}

impl BendersCut {
    pub fn lhs(&self, v: &[f64], eta: &[f64]) -> f64 {
        let mut sum = 0.0;
        for &(k, a) in &self.rows {
            sum += a * v[k];
        }
        if let Some((t, c)) = self.eta {
            sum += c * eta[t];
        }
        sum
    }

    /// `rhs - lhs`; positive when the point violates the cut.
    pub fn violation(&self, v: &[f64], eta: &[f64]) -> f64 {
        self.rhs - self.lhs(v, eta)
    }

    /// The block probability at the separation point (block cuts only).
    pub fn delta(&self) -> Option<f64> {
        match (self.kind, self.eta) {
            (CutKind::Block, Some((_, c))) => Some(-c),
            _ => None,
        }
    }

    /// `kind node round rhs nterms row:coef ... [eta:t:coef]`, 1-based ids.
    pub fn log_line(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}",
            self.kind,
            self.origin.0,
            self.origin.1,
            format_real(self.rhs),
            self.rows.len()
        );
        for &(k, a) in &self.rows {
            write!(out, " {}:{}", k + 1, format_real(a)).unwrap();
        }
        if let Some((t, c)) = self.eta {
            write!(out, " eta:{}:{}", t + 1, format_real(c)).unwrap();
        }
        out
    }
}

struct Sweep {
    /// Local rows in visiting order.
    order: Vec<usize>,
    /// Probability charged to each local row.
    coef: Vec<f64>,
    /// `sum_l coef_l v*_l`, accumulated in local row order.
    covered: f64,
}

fn sweep(block: &BlockIndex, prob: &[f64], v: &[f64]) -> Sweep {
    let vals: Vec<f64> = block.rows.iter().map(|&k| v[k]).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let mut marked = vec![false; prob.len()];
    let mut coef = vec![0.0; vals.len()];
    for &l in &order {
        for &i in &block.scenarios_of_row[l] {
            if !marked[i] {
                marked[i] = true;
                coef[l] += prob[i];
            }
        }
    }
    let mut covered = 0.0;
    for (l, &a) in coef.iter().enumerate() {
        if a != 0.0 {
            covered += a * vals[l];
        }
    }
    Sweep { order, coef, covered }
}

fn sparse_rows(block: &BlockIndex, coef: &[f64]) -> Vec<(usize, f64)> {
    coef.iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(l, &a)| (block.rows[l], a))
        .collect()
}

/// Chance-constraint shortfall at `v*` for single-block data:
/// `(1 - eps) - satisfied_mass - sum_i p_i min_{k in M_i} v*_k`.
pub fn psi_generic(v: &[f64], eps: f64, idx: &IndexMaps, scen: &ScenarioSet) -> f64 {
    debug_assert_eq!(scen.num_blocks(), 1);
    let b = &scen.blocks[0];
    let sw = sweep(&idx.blocks[0], &b.prob, v);
    ((1.0 - eps) - b.satisfied_mass) - sw.covered
}

/// The feasibility cut `sum_k a_k v_k >= (1 - eps) - satisfied_mass`,
/// returned when its violation at `v*` (which equals [`psi_generic`]) exceeds `tol`.
pub fn separate_generic(v: &[f64], eps: f64, idx: &IndexMaps, scen: &ScenarioSet, tol: f64) -> Option<BendersCut> {
    debug_assert_eq!(scen.num_blocks(), 1);
    let b = &scen.blocks[0];
    let block = &idx.blocks[0];
    let sw = sweep(block, &b.prob, v);
    let rhs = (1.0 - eps) - b.satisfied_mass;
    if rhs - sw.covered <= tol {
        return None;
    }
    Some(BendersCut {
        kind: CutKind::Generic,
        rows: sparse_rows(block, &sw.coef),
        eta: None,
        rhs,
        origin: (0, 0),
    })
}

/// Block probability `delta = satisfied_mass_t + sum_i p_it min_{k in M_i} v*_k`.
pub fn block_delta(v: &[f64], t: usize, idx: &IndexMaps, scen: &ScenarioSet) -> f64 {
    let b = &scen.blocks[t];
    b.satisfied_mass + sweep(&idx.blocks[t], &b.prob, v).covered
}

/// `eta*_t - ln delta`, or `+inf` when `delta = 0`.
pub fn psi_block(v: &[f64], eta_t: f64, t: usize, idx: &IndexMaps, scen: &ScenarioSet) -> f64 {
    let delta = block_delta(v, t, idx, scen);
    if delta == 0.0 {
        f64::INFINITY
    } else {
        eta_t - delta.ln()
    }
}

/// Separates block `t` at `(v*, eta*_t)`.
///
/// With no satisfied mass and `delta` at (or numerically near) zero, this is
/// the coverage inequality over the shortest sorted prefix of rows whose
/// scenario sets cover the whole block. Otherwise it is the tangent cut
/// `sum_k a_k v_k - delta eta_t >= delta (1 - ln delta) - satisfied_mass_t`,
/// which is tight at `(v*, ln delta)`.
pub fn separate_block(
    v: &[f64],
    eta_t: f64,
    t: usize,
    idx: &IndexMaps,
    scen: &ScenarioSet,
    tol: f64,
) -> Option<BendersCut> {
    let b = &scen.blocks[t];
    let block = &idx.blocks[t];
    let sw = sweep(block, &b.prob, v);
    let delta = b.satisfied_mass + sw.covered;
    if b.satisfied_mass == 0.0 && delta <= DELTA_FLOOR {
        if let Some(cut) = coverage_cut(block, b.len(), &sw.order) {
            if cut.violation(v, &[]) > tol {
                return Some(cut);
            }
        }
    }
    if delta == 0.0 || eta_t - delta.ln() <= tol {
        return None;
    }
    Some(BendersCut {
        kind: CutKind::Block,
        rows: sparse_rows(block, &sw.coef),
        eta: Some((t, -delta)),
        rhs: delta * (1.0 - delta.ln()) - b.satisfied_mass,
        origin: (0, 0),
    })
}

fn coverage_cut(block: &BlockIndex, scenarios: usize, order: &[usize]) -> Option<BendersCut> {
    let mut marked = vec![false; scenarios];
    let mut left = scenarios;
    let mut prefix = Vec::new();
    for &l in order {
        if left == 0 {
            break;
        }
        prefix.push(block.rows[l]);
        for &i in &block.scenarios_of_row[l] {
            if !marked[i] {
                marked[i] = true;
                left -= 1;
            }
        }
    }
    if left > 0 || prefix.is_empty() {
        return None;
    }
    prefix.sort_unstable();
    Some(BendersCut {
        kind: CutKind::Coverage,
        rows: prefix.into_iter().map(|k| (k, 1.0)).collect(),
        eta: None,
        rhs: 1.0,
        origin: (0, 0),
    })
}

/// Separates every block; at most one cut per block.
pub fn separate_blocks(
    v: &[f64],
    eta: &[f64],
    idx: &IndexMaps,
    scen: &ScenarioSet,
    tol: f64,
) -> Vec<BendersCut> {
    (0..scen.num_blocks())
        .filter_map(|t| separate_block(v, eta[t], t, idx, scen, tol))
        .collect()
}
