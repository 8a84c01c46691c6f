//! Bounded-variable simplex over an explicit dense basis inverse.
//!
//! Every row `a.x <sense> b` gets a logical variable `r = a.x` whose bounds
//! encode the sense, so the constraint system is `[A | -I] (x, r) = 0` and
//! all feasibility questions become bound questions. The basis inverse is
//! kept as a dense row-major matrix, updated by rank-one pivots and rebuilt
//! from scratch every [`REFACTOR_INTERVAL`] pivots.
//!
//! `solve` runs the dual simplex whenever the current basis can be made dual
//! feasible (the common case after adding cuts or changing bounds), and falls
//! back to a two-phase primal simplex otherwise.

use crate::model::{Basis, LpModel, LpStatus, Row, Sense, VarStatus};
use crate::LpError;

/// Pivots between two rebuilds of the basis inverse.
pub const REFACTOR_INTERVAL: usize = 50;

/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

/// Entries below this magnitude are treated as structural zeros while
/// rebuilding the basis inverse.
const SINGULAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility tolerance on variable bounds.
    pub primal: f64,
    /// Dual feasibility (optimality) tolerance on reduced costs.
    pub dual: f64,
    /// Minimum pivot magnitude accepted by the ratio tests.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            primal: 1e-7,
            dual: 1e-7,
            pivot: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// A reusable simplex engine. Rows can be added or removed and bounds changed
/// between solves; the current basis is kept as the warm start.
#[derive(Debug, Clone)]
pub struct Simplex {
    nv: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Row>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    head: Vec<usize>,
    binv: Vec<f64>,
    stride: usize,
    since_refactor: usize,
    need_refactor: bool,
    iterations: usize,
    tol: Tolerances,
    max_iterations: usize,
}

impl Simplex {
    pub fn new(model: &LpModel) -> Result<Self, LpError> {
        Self::with_tolerances(model, Tolerances::default())
    }

    pub fn with_tolerances(model: &LpModel, tol: Tolerances) -> Result<Self, LpError> {
        model.validate()?;
        let nv = model.num_vars();
        let mut s = Simplex {
            nv,
            cols: vec![Vec::new(); nv],
            rows: Vec::with_capacity(model.num_rows()),
            lo: model.lower.clone(),
            up: model.upper.clone(),
            cost: model.obj.clone(),
            x: vec![0.0; nv],
            state: vec![State::Lower; nv],
            head: Vec::new(),
            binv: Vec::new(),
            stride: 0,
            since_refactor: 0,
            need_refactor: false,
            iterations: 0,
            tol,
            max_iterations: 0,
        };
        for j in 0..nv {
            s.state[j] = initial_state(s.lo[j], s.up[j], s.cost[j]);
            s.x[j] = s.nonbasic_value(j);
        }
        for row in &model.rows {
            s.add_row(row.coeffs.clone(), row.sense, row.rhs);
        }
        if let Some(b) = &model.warm_start {
            s.set_basis(b)?;
        }
        Ok(s)
    }

    pub fn num_vars(&self) -> usize {
        self.nv
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    /// Total simplex iterations performed by this engine.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Caps the iterations of a single `solve` call; 0 selects a size-based default.
    pub fn set_max_iterations(&mut self, limit: usize) {
        self.max_iterations = limit;
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.nv]
    }

    pub fn row_activity(&self, i: usize) -> f64 {
        self.x[self.nv + i]
    }

    pub fn objective(&self) -> f64 {
        (0..self.nv).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.up[j])
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if j >= self.nv {
            return Err(LpError::VarOutOfRange { row: usize::MAX, var: j });
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(LpError::InvalidBounds { var: j, lower, upper });
        }
        self.lo[j] = lower;
        self.up[j] = upper;
        if !matches!(self.state[j], State::Basic(_)) {
            self.state[j] = settle(self.state[j], lower, upper);
            self.x[j] = self.nonbasic_value(j);
        }
        Ok(())
    }

    pub fn basis(&self) -> Basis {
        let status = |j: usize| match self.state[j] {
            State::Basic(_) => VarStatus::Basic,
            State::Lower => VarStatus::AtLower,
            State::Upper => VarStatus::AtUpper,
            State::Free => VarStatus::Free,
        };
        Basis {
            vars: (0..self.nv).map(status).collect(),
            rows: (0..self.rows.len()).map(|i| status(self.nv + i)).collect(),
        }
    }

    /// Installs a basis. Bases with the wrong number of basic variables or a
    /// singular basis matrix are repaired at the next solve.
    pub fn set_basis(&mut self, basis: &Basis) -> Result<(), LpError> {
        if basis.vars.len() != self.nv || basis.rows.len() != self.rows.len() {
            return Err(LpError::BasisShape);
        }
        let statuses = basis.vars.iter().chain(basis.rows.iter());
        for (j, st) in statuses.enumerate() {
            self.state[j] = match st {
                VarStatus::Basic => State::Basic(usize::MAX),
                VarStatus::AtLower => settle(State::Lower, self.lo[j], self.up[j]),
                VarStatus::AtUpper => settle(State::Upper, self.lo[j], self.up[j]),
                VarStatus::Free => settle(State::Free, self.lo[j], self.up[j]),
            };
            if !matches!(self.state[j], State::Basic(_)) {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.need_refactor = true;
        Ok(())
    }

    /// Appends a row; its logical variable enters the basis.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let coeffs = merge_duplicates(coeffs);
        let i = self.rows.len();
        for &(j, a) in &coeffs {
            self.cols[j].push((i, a));
        }
        let row = Row::new(coeffs, sense, rhs);
        let (lo, up) = row.activity_bounds();
        let activity = row.activity(&self.x[..self.nv]);
        self.rows.push(row);
        self.lo.push(lo);
        self.up.push(up);
        self.cost.push(0.0);
        self.x.push(activity);
        let p = self.head.len();
        self.head.push(self.nv + i);
        self.state.push(State::Basic(p));
        if !self.need_refactor {
            self.extend_inverse(i);
        }
        i
    }

    /// Removes the given rows (indices into the current row list). Remaining
    /// rows are renumbered preserving order.
    pub fn remove_rows(&mut self, remove: &[usize]) {
        if remove.is_empty() {
            return;
        }
        let nr = self.rows.len();
        let mut dropped = vec![false; nr];
        for &i in remove {
            if i < nr {
                dropped[i] = true;
            }
        }
        let mut new_index = vec![usize::MAX; nr];
        let mut next = 0;
        for i in 0..nr {
            if !dropped[i] {
                new_index[i] = next;
                next += 1;
            }
        }
        for col in &mut self.cols {
            col.retain(|&(i, _)| !dropped[i]);
            for e in col.iter_mut() {
                e.0 = new_index[e.0];
            }
        }
        let nv = self.nv;
        let keep = |j: usize| j < nv || !dropped[j - nv];
        let mut k = 0;
        self.rows.retain(|_| {
            k += 1;
            !dropped[k - 1]
        });
        macro_rules! filter {
            ($v:expr) => {{
                let mut j = 0;
                $v.retain(|_| {
                    j += 1;
                    keep(j - 1)
                });
            }};
        }
        filter!(self.lo);
        filter!(self.up);
        filter!(self.cost);
        filter!(self.x);
        filter!(self.state);
        self.need_refactor = true;
    }

    /// Solves from the current basis.
    pub fn solve(&mut self) -> LpStatus {
        let budget = if self.max_iterations > 0 {
            self.max_iterations
        } else {
            20_000 + 50 * (self.nv + self.rows.len())
        };
        let stop_at = self.iterations + budget;
        if self.need_refactor {
            self.refactor();
        }
        self.recompute_primal();

        let mut status = if self.make_dual_feasible() {
            match self.dual_simplex(stop_at) {
                LpStatus::Optimal if self.is_dual_feasible() => LpStatus::Optimal,
                LpStatus::NumericalFailure => {
                    self.refactor();
                    self.recompute_primal();
                    self.primal_simplex(stop_at)
                }
                // dual infeasibility drift, or an infeasibility claim that the
                // primal phase one confirms independently
                _ => self.primal_simplex(stop_at),
            }
        } else {
            self.primal_simplex(stop_at)
        };

        if status == LpStatus::Optimal && !self.verify() {
            self.refactor();
            self.recompute_primal();
            status = self.primal_simplex(stop_at);
            if status == LpStatus::Optimal && !self.verify() {
                status = LpStatus::NumericalFailure;
            }
        }
        status
    }

    // ---------------------------------------------------------------------
    // linear algebra helpers

    #[inline]
    fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.nv {
            for &(i, a) in &self.cols[j] {
                f(i, a);
            }
        } else {
            f(j - self.nv, -1.0);
        }
    }

    #[inline]
    fn binv_row(&self, p: usize) -> &[f64] {
        let nr = self.rows.len();
        &self.binv[p * self.stride..p * self.stride + nr]
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let nr = self.rows.len();
        let mut out = vec![0.0; nr];
        self.for_each_entry(j, |i, a| {
            for (p, o) in out.iter_mut().enumerate() {
                let b = self.binv[p * self.stride + i];
                if b != 0.0 {
                    *o += a * b;
                }
            }
        });
        out
    }

    fn dot_column(&self, j: usize, v: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each_entry(j, |i, a| s += a * v[i]);
        s
    }

    fn duals(&self, basic_costs: &[f64]) -> Vec<f64> {
        let nr = self.rows.len();
        let mut y = vec![0.0; nr];
        for (p, &c) in basic_costs.iter().enumerate() {
            if c != 0.0 {
                for (yi, b) in y.iter_mut().zip(self.binv_row(p)) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: f64, y: &[f64]) -> f64 {
        cost - self.dot_column(j, y)
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lo[j],
            State::Upper => self.up[j],
            State::Free => 0.0,
            State::Basic(_) => self.x[j],
        }
    }

    fn recompute_primal(&mut self) {
        let nr = self.rows.len();
        let mut rhs = vec![0.0; nr];
        for j in 0..self.state.len() {
            if matches!(self.state[j], State::Basic(_)) {
                continue;
            }
            let xj = self.nonbasic_value(j);
            self.x[j] = xj;
            if xj != 0.0 {
                self.for_each_entry(j, |i, a| rhs[i] -= a * xj);
            }
        }
        for p in 0..nr {
            let v: f64 = self.binv_row(p).iter().zip(&rhs).map(|(b, r)| b * r).sum();
            let j = self.head[p];
            self.x[j] = v;
        }
    }

    fn ensure_stride(&mut self, nr: usize) {
        if nr <= self.stride {
            return;
        }
        let new_stride = (self.stride * 2).max(nr).max(8);
        let mut fresh = vec![0.0; new_stride * new_stride];
        let old_rows = self.head.len().min(self.stride);
        for p in 0..old_rows {
            let src = &self.binv[p * self.stride..p * self.stride + self.stride];
            fresh[p * new_stride..p * new_stride + self.stride].copy_from_slice(src);
        }
        self.binv = fresh;
        self.stride = new_stride;
    }

    /// Extends the inverse after appending row `i` with its logical basic at
    /// the last basis position.
    fn extend_inverse(&mut self, i: usize) {
        let nr = i + 1;
        self.ensure_stride(nr);
        let p_new = nr - 1;
        let mut new_row = vec![0.0; nr];
        for &(j, coef) in &self.rows[i].coeffs {
            if let State::Basic(p) = self.state[j] {
                for (w, b) in new_row.iter_mut().zip(self.binv_row(p)) {
                    *w += coef * b;
                }
            }
        }
        new_row[i] = -1.0;
        let start = p_new * self.stride;
        self.binv[start..start + nr].copy_from_slice(&new_row);
        for p in 0..p_new {
            self.binv[p * self.stride + i] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let nr = self.rows.len();
        let piv = alpha[r];
        let stride = self.stride;
        {
            let row_r = &mut self.binv[r * stride..r * stride + nr];
            for b in row_r.iter_mut() {
                *b /= piv;
            }
        }
        let pivot_row: Vec<f64> = self.binv[r * stride..r * stride + nr].to_vec();
        for (p, &a) in alpha.iter().enumerate() {
            if p == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[p * stride..p * stride + nr];
            for (b, pr) in row.iter_mut().zip(&pivot_row) {
                *b -= a * pr;
            }
        }
        self.head[r] = q;
        self.state[q] = State::Basic(r);
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Rebuilds the basis inverse from the basic statuses, repairing a
    /// singular or mis-sized basis by swapping in row logicals.
    fn refactor(&mut self) {
        let nr = self.rows.len();
        let nv = self.nv;
        let basic: Vec<usize> = (0..self.state.len())
            .filter(|&j| matches!(self.state[j], State::Basic(_)))
            .collect();
        let mut logical_basic = vec![false; nr];
        let mut structurals = Vec::new();
        for &j in &basic {
            if j >= nv {
                logical_basic[j - nv] = true;
            } else {
                structurals.push(j);
            }
        }
        let free_rows: Vec<usize> = (0..nr).filter(|&i| !logical_basic[i]).collect();
        let mut row_slot = vec![usize::MAX; nr];
        for (r, &i) in free_rows.iter().enumerate() {
            row_slot[i] = r;
        }

        // Pass 1: find a pivot row for every structural column.
        let kr = free_rows.len();
        let kc = structurals.len();
        let mut mat = vec![0.0; kr * kc];
        for (c, &j) in structurals.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                let r = row_slot[i];
                if r != usize::MAX {
                    mat[r * kc + c] += a;
                }
            }
        }
        let mut row_used = vec![false; kr];
        let mut kept: Vec<(usize, usize)> = Vec::with_capacity(kc); // (column, row slot)
        for c in 0..kc {
            let mut best = None;
            let mut best_val = SINGULAR_TOL;
            for r in 0..kr {
                if !row_used[r] {
                    let v = mat[r * kc + c].abs();
                    if v > best_val {
                        best_val = v;
                        best = Some(r);
                    }
                }
            }
            let Some(pr) = best else {
                let j = structurals[c];
                self.state[j] = settle(State::Lower, self.lo[j], self.up[j]);
                let v = self.x[j];
                if self.lo[j].is_finite() && self.up[j].is_finite() {
                    self.state[j] = if (v - self.lo[j]).abs() <= (self.up[j] - v).abs() {
                        State::Lower
                    } else {
                        State::Upper
                    };
                }
                self.x[j] = self.nonbasic_value(j);
                continue;
            };
            row_used[pr] = true;
            kept.push((c, pr));
            let pv = mat[pr * kc + c];
            for r in 0..kr {
                if row_used[r] {
                    continue;
                }
                let f = mat[r * kc + c] / pv;
                if f != 0.0 {
                    for cc in c..kc {
                        mat[r * kc + cc] -= f * mat[pr * kc + cc];
                    }
                }
            }
        }
        for r in 0..kr {
            if !row_used[r] {
                logical_basic[free_rows[r]] = true;
            }
        }

        // Pass 2: invert the square block K = A[pivot rows, kept columns].
        let k = kept.len();
        let kcols: Vec<usize> = kept.iter().map(|&(c, _)| structurals[c]).collect();
        let krows: Vec<usize> = kept.iter().map(|&(_, r)| free_rows[r]).collect();
        let mut slot_of_row = vec![usize::MAX; nr];
        for (r, &i) in krows.iter().enumerate() {
            slot_of_row[i] = r;
        }
        let mut kmat = vec![0.0; k * k];
        for (c, &j) in kcols.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                let r = slot_of_row[i];
                if r != usize::MAX {
                    kmat[r * k + c] += a;
                }
            }
        }
        let kinv = invert_dense(&mut kmat, k);

        // Assemble the head: kept structurals, then logicals by row.
        self.head.clear();
        for &j in &kcols {
            self.head.push(j);
        }
        for i in 0..nr {
            if logical_basic[i] {
                self.head.push(nv + i);
            }
        }
        debug_assert_eq!(self.head.len(), nr);
        for j in 0..self.state.len() {
            if let State::Basic(_) = self.state[j] {
                self.state[j] = settle(State::Lower, self.lo[j], self.up[j]);
            }
        }
        for (p, &j) in self.head.iter().enumerate() {
            self.state[j] = State::Basic(p);
        }
        self.stride = 0;
        self.binv.clear();
        self.ensure_stride(nr);
        // Structural positions: inverse of K scattered onto pivot rows.
        for c in 0..k {
            for r in 0..k {
                self.binv[c * self.stride + krows[r]] = kinv[c * k + r];
            }
        }
        // Logical positions: (A[i, S] K^-1) - e_i.
        let mut pos_of_row = vec![usize::MAX; nr];
        for (p, &j) in self.head.iter().enumerate().skip(k) {
            pos_of_row[j - nv] = p;
            self.binv[p * self.stride + (j - nv)] = -1.0;
        }
        for (c, &j) in kcols.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                let pl = pos_of_row[i];
                if pl == usize::MAX {
                    continue;
                }
                for &ri in &krows {
                    let v = self.binv[c * self.stride + ri];
                    if v != 0.0 {
                        self.binv[pl * self.stride + ri] += a * v;
                    }
                }
            }
        }
        self.need_refactor = false;
        self.since_refactor = 0;
    }

    // ---------------------------------------------------------------------
    // feasibility helpers

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - self.tol.primal {
            self.lo[j] - v
        } else if v > self.up[j] + self.tol.primal {
            v - self.up[j]
        } else {
            0.0
        }
    }

    fn basic_costs(&self) -> Vec<f64> {
        self.head.iter().map(|&j| self.cost[j]).collect()
    }

    /// Flips boxed nonbasics to the bound matching their reduced cost sign.
    /// Returns false when some nonbasic cannot be made dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals(&self.basic_costs());
        let mut flipped = false;
        for j in 0..self.state.len() {
            let st = self.state[j];
            if matches!(st, State::Basic(_)) || self.lo[j] == self.up[j] {
                continue;
            }
            let d = self.reduced_cost(j, self.cost[j], &y);
            let boxed = self.lo[j].is_finite() && self.up[j].is_finite();
            match st {
                State::Lower if d < -self.tol.dual => {
                    if !boxed {
                        return false;
                    }
                    self.state[j] = State::Upper;
                    flipped = true;
                }
                State::Upper if d > self.tol.dual => {
                    if !boxed {
                        return false;
                    }
                    self.state[j] = State::Lower;
                    flipped = true;
                }
                State::Free if d.abs() > self.tol.dual => return false,
                _ => {}
            }
        }
        if flipped {
            self.recompute_primal();
        }
        true
    }

    fn is_dual_feasible(&self) -> bool {
        let y = self.duals(&self.basic_costs());
        (0..self.state.len()).all(|j| {
            if self.lo[j] == self.up[j] {
                return true;
            }
            let d = self.reduced_cost(j, self.cost[j], &y);
            match self.state[j] {
                State::Basic(_) => true,
                State::Lower => d >= -self.tol.dual * 10.0,
                State::Upper => d <= self.tol.dual * 10.0,
                State::Free => d.abs() <= self.tol.dual * 10.0,
            }
        })
    }

    /// Recomputes row activities from the structural values and checks them
    /// against the row senses and the variable bounds.
    fn verify(&self) -> bool {
        let xs = &self.x[..self.nv];
        let tol = |b: f64| self.tol.primal * (1.0 + b.abs()) + 1e-9;
        for j in 0..self.nv {
            if xs[j] < self.lo[j] - tol(self.lo[j]) || xs[j] > self.up[j] + tol(self.up[j]) {
                return false;
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let act = row.activity(xs);
            if (act - self.x[self.nv + i]).abs() > 1e-6 * (1.0 + act.abs()) {
                return false;
            }
            let (lo, up) = row.activity_bounds();
            if act < lo - tol(lo) || act > up + tol(up) {
                return false;
            }
        }
        true
    }

    // ---------------------------------------------------------------------
    // dual simplex

    fn dual_simplex(&mut self, stop_at: usize) -> LpStatus {
        let nr = self.rows.len();
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut mismatches = 0usize;
        loop {
            if self.iterations >= stop_at {
                return LpStatus::NumericalFailure;
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
                self.recompute_primal();
            }

            // leaving row
            let mut leave: Option<(usize, f64)> = None;
            for p in 0..nr {
                let j = self.head[p];
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((bp, binf)) => {
                        let bj = self.head[bp];
                        if bland {
                            j < bj
                        } else {
                            inf > binf || (inf == binf && j < bj)
                        }
                    }
                };
                if better {
                    leave = Some((p, inf));
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Optimal;
            };
            let leaving = self.head[r];
            let to_lower = self.x[leaving] < self.lo[leaving];

            let y = self.duals(&self.basic_costs());
            let rho: Vec<f64> = self.binv_row(r).to_vec();

            // (var, alpha_rj, ratio)
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..self.state.len() {
                let st = self.state[j];
                if matches!(st, State::Basic(_)) || self.lo[j] == self.up[j] {
                    continue;
                }
                let alpha = self.dot_column(j, &rho);
                if alpha.abs() < self.tol.pivot {
                    continue;
                }
                let eligible = match st {
                    State::Lower => (alpha < 0.0) == to_lower,
                    State::Upper => (alpha > 0.0) == to_lower,
                    State::Free => true,
                    State::Basic(_) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j, self.cost[j], &y);
                let d_eff = match st {
                    State::Lower => d.max(0.0),
                    State::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                cands.push((j, alpha, d_eff / alpha.abs()));
            }
            if cands.is_empty() {
                return LpStatus::Infeasible;
            }
            let (q, alpha_rq, ratio) = if bland {
                *cands
                    .iter()
                    .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
                    .unwrap()
            } else {
                let bound = cands
                    .iter()
                    .map(|&(_, a, r)| r + self.tol.dual / a.abs())
                    .fold(f64::INFINITY, f64::min);
                *cands
                    .iter()
                    .filter(|c| c.2 <= bound)
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                    .unwrap()
            };

            let alpha_q = self.ftran(q);
            let piv = alpha_q[r];
            if (piv - alpha_rq).abs() > 1e-7 * (1.0 + alpha_rq.abs()) || piv.abs() < self.tol.pivot {
                mismatches += 1;
                if mismatches > 3 {
                    return LpStatus::NumericalFailure;
                }
                self.refactor();
                self.recompute_primal();
                continue;
            }

            let target = if to_lower {
                self.lo[leaving]
            } else {
                self.up[leaving]
            };
            let delta_q = (self.x[leaving] - target) / piv;
            for p in 0..nr {
                if alpha_q[p] != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= alpha_q[p] * delta_q;
                }
            }
            self.x[q] += delta_q;
            self.x[leaving] = target;
            self.state[leaving] = if to_lower { State::Lower } else { State::Upper };
            self.pivot(r, q, &alpha_q);

            if ratio * alpha_rq.abs() <= 1e-12 {
                degenerate += 1;
                if degenerate >= STALL_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
        }
    }

    // ---------------------------------------------------------------------
    // primal simplex

    fn primal_simplex(&mut self, stop_at: usize) -> LpStatus {
        let nr = self.rows.len();
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= stop_at {
                return LpStatus::NumericalFailure;
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
                self.recompute_primal();
            }

            let mut phase = Phase::Two;
            let mut cb = vec![0.0; nr];
            for p in 0..nr {
                let j = self.head[p];
                if self.x[j] < self.lo[j] - self.tol.primal {
                    cb[p] = -1.0;
                    phase = Phase::One;
                } else if self.x[j] > self.up[j] + self.tol.primal {
                    cb[p] = 1.0;
                    phase = Phase::One;
                }
            }
            if phase == Phase::Two {
                cb = self.basic_costs();
            }
            let y = self.duals(&cb);

            // entering variable and direction
            let mut enter: Option<(usize, f64, f64)> = None; // (var, |d|, dir)
            for j in 0..self.state.len() {
                let st = self.state[j];
                if matches!(st, State::Basic(_)) || self.lo[j] == self.up[j] {
                    continue;
                }
                let c = if phase == Phase::One { 0.0 } else { self.cost[j] };
                let d = self.reduced_cost(j, c, &y);
                let dir = match st {
                    State::Lower if d < -self.tol.dual => 1.0,
                    State::Upper if d > self.tol.dual => -1.0,
                    State::Free if d.abs() > self.tol.dual => -d.signum(),
                    _ => continue,
                };
                let better = match enter {
                    None => true,
                    Some((_, bd, _)) => !bland && d.abs() > bd,
                };
                if better {
                    enter = Some((j, d.abs(), dir));
                }
            }
            let Some((q, _, dir)) = enter else {
                return match phase {
                    Phase::One => LpStatus::Infeasible,
                    Phase::Two => LpStatus::Optimal,
                };
            };

            let alpha = self.ftran(q);
            // (position, rate, distance, leaves at lower)
            let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
            for p in 0..nr {
                if alpha[p].abs() < self.tol.pivot {
                    continue;
                }
                let rate = -alpha[p] * dir;
                let j = self.head[p];
                let v = self.x[j];
                let (lo, up) = (self.lo[j], self.up[j]);
                let cand = if phase == Phase::One && v < lo - self.tol.primal {
                    (rate > 0.0).then_some((lo - v, true))
                } else if phase == Phase::One && v > up + self.tol.primal {
                    (rate < 0.0).then_some((v - up, false))
                } else if rate < 0.0 && lo.is_finite() {
                    Some(((v - lo).max(0.0), true))
                } else if rate > 0.0 && up.is_finite() {
                    Some(((up - v).max(0.0), false))
                } else {
                    None
                };
                if let Some((dist, at_lower)) = cand {
                    cands.push((p, rate, dist, at_lower));
                }
            }
            let flip = self.up[q] - self.lo[q];

            let chosen = if cands.is_empty() {
                None
            } else if bland {
                cands
                    .iter()
                    .min_by(|a, b| {
                        (a.2 / a.1.abs())
                            .total_cmp(&(b.2 / b.1.abs()))
                            .then(self.head[a.0].cmp(&self.head[b.0]))
                    })
                    .copied()
            } else {
                let bound = cands
                    .iter()
                    .map(|c| (c.2 + self.tol.primal) / c.1.abs())
                    .fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.2 / c.1.abs() <= bound)
                    .max_by(|a, b| {
                        a.1.abs()
                            .total_cmp(&b.1.abs())
                            .then(self.head[b.0].cmp(&self.head[a.0]))
                    })
                    .copied()
            };

            let step_basis = chosen.map(|c| c.2 / c.1.abs());
            if step_basis.is_none() && !flip.is_finite() {
                return match phase {
                    Phase::Two => LpStatus::Unbounded,
                    Phase::One => LpStatus::NumericalFailure,
                };
            }
            if flip.is_finite() && step_basis.is_none_or(|t| flip <= t) {
                for p in 0..nr {
                    if alpha[p] != 0.0 {
                        let j = self.head[p];
                        self.x[j] += -alpha[p] * dir * flip;
                    }
                }
                self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                self.x[q] = self.nonbasic_value(q);
                self.iterations += 1;
                degenerate = 0;
                continue;
            }

            let (r, _, _, at_lower) = chosen.unwrap();
            let t = step_basis.unwrap().max(0.0);
            for p in 0..nr {
                if alpha[p] != 0.0 {
                    let j = self.head[p];
                    self.x[j] += -alpha[p] * dir * t;
                }
            }
            self.x[q] += dir * t;
            let leaving = self.head[r];
            self.state[leaving] = if at_lower { State::Lower } else { State::Upper };
            self.x[leaving] = if at_lower {
                self.lo[leaving]
            } else {
                self.up[leaving]
            };
            self.pivot(r, q, &alpha);

            if t <= 1e-12 {
                degenerate += 1;
                if degenerate >= STALL_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
        }
    }
}

fn initial_state(lo: f64, up: f64, cost: f64) -> State {
    if cost < 0.0 && up.is_finite() {
        State::Upper
    } else if lo.is_finite() {
        State::Lower
    } else if up.is_finite() {
        State::Upper
    } else {
        State::Free
    }
}

/// Adjusts a nonbasic status so that it refers to a finite bound.
fn settle(st: State, lo: f64, up: f64) -> State {
    match st {
        State::Lower if lo.is_finite() => State::Lower,
        State::Upper if up.is_finite() => State::Upper,
        State::Basic(p) => State::Basic(p),
        _ => {
            if lo.is_finite() {
                State::Lower
            } else if up.is_finite() {
                State::Upper
            } else {
                State::Free
            }
        }
    }
}

fn merge_duplicates(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

/// Gauss-Jordan inversion with partial pivoting of a nonsingular `k x k`
/// row-major matrix.
fn invert_dense(mat: &mut [f64], k: usize) -> Vec<f64> {
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    for c in 0..k {
        let mut pr = c;
        let mut best = mat[c * k + c].abs();
        for r in c + 1..k {
            let v = mat[r * k + c].abs();
            if v > best {
                best = v;
                pr = r;
            }
        }
        if pr != c {
            for cc in 0..k {
                mat.swap(c * k + cc, pr * k + cc);
                inv.swap(c * k + cc, pr * k + cc);
            }
        }
        let pv = mat[c * k + c];
        for cc in 0..k {
            mat[c * k + cc] /= pv;
            inv[c * k + cc] /= pv;
        }
        for r in 0..k {
            if r == c {
                continue;
            }
            let f = mat[r * k + c];
            if f == 0.0 {
                continue;
            }
            for cc in 0..k {
                mat[r * k + cc] -= f * mat[c * k + cc];
                inv[r * k + cc] -= f * inv[c * k + cc];
            }
        }
    }
    inv
}
