//! Projected master problems and branch-and-cut over them.
//!
//! Master variables are laid out as `x_0..x_{n-1}`, then `v_0..v_{m-1}`, then
//! (block mode) `eta_0..eta_{T-1}`. The scenario indicators never appear, so
//! the master size does not depend on the number of scenarios.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::rc::Rc;
use std::str::FromStr;
use std::time::{Duration, Instant};

use pscp_lp::{LpModel, LpStatus, Sense, Simplex, VarStatus};

use crate::cuts::{separate_blocks, separate_generic, BendersCut, CutKind, SEPARATION_TOL};
use crate::error::{PscpError, Result};
use crate::heuristic::round_master_point;
use crate::instance::{build_indices, format_real, CoverInstance, IndexMaps, ScenarioSet};
use crate::preprocess::block_forced_rows;

/// Slack on `P >= 1 - eps` in the exact feasibility check.
pub const FEASIBILITY_SLACK: f64 = 1e-12;
/// Distance to the nearest integer below which a master value is integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Violation threshold when separating at rounded integral points.
pub const INTEGRAL_SEPARATION_TOL: f64 = 1e-12;
/// Separation rounds per node before the node is branched on.
pub const NODE_ROUNDS: usize = 50;
/// A cut is idle at a node LP when its slack exceeds this.
pub const IDLE_SLACK: f64 = 1e-4;
/// Consecutive idle node LPs after which a non-root cut may be dropped.
pub const IDLE_LIMIT: usize = 50;
/// Nodes between two runs of the rounding heuristic once an incumbent exists.
pub const HEURISTIC_INTERVAL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Generic,
    Block,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Generic => "generic",
            Mode::Block => "block",
        })
    }
}

impl FromStr for Mode {
    type Err = PscpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Mode::Generic),
            "block" => Ok(Mode::Block),
            _ => Err(PscpError::Invalid(format!("unknown mode {:?}", s))),
        }
    }
}

/// Probability that the rows marked in `v` cover the random right-hand side:
/// the product over blocks of `mass_t + sum_{i : xi_i <= v} p_it`.
pub fn coverage_probability(v: &[bool], scen: &ScenarioSet) -> f64 {
    scen.blocks
        .iter()
        .map(|b| {
            let hit: f64 = b
                .scenarios
                .iter()
                .zip(&b.prob)
                .filter(|(rows, _)| rows.iter().all(|&k| v[k]))
                .map(|(_, &p)| p)
                .sum();
            b.satisfied_mass + hit
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub probability: f64,
}

/// Exact check of `P(Ax >= xi) >= 1 - eps` for a 0-1 vector `x`. With one
/// block this is the plain scenario sum; with several it is the product of
/// the block probabilities.
pub fn check_feasible(x: &[bool], inst: &CoverInstance, scen: &ScenarioSet, eps: f64) -> Feasibility {
    let v = inst.covered_rows(x);
    let probability = coverage_probability(&v, scen);
    Feasibility { feasible: probability >= 1.0 - eps - FEASIBILITY_SLACK, probability }
}

/// The projected master: variable bounds, structural rows `sum_{j covers k} x_j - v_k >= 0`,
/// in block mode the row `sum_t eta_t >= ln(1 - eps)`, and the cut pool.
#[derive(Debug, Clone)]
pub struct MasterModel {
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub blocks: usize,
    pub eps: f64,
    pub lp: LpModel,
    pub fixed_rows: Vec<usize>,
    pub pool: Vec<BendersCut>,
}

impl MasterModel {
    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    pub fn v_var(&self, k: usize) -> usize {
        self.n + k
    }

    pub fn eta_var(&self, t: usize) -> usize {
        self.n + self.m + t
    }

    /// Number of `eta` variables (zero in generic mode).
    pub fn num_eta(&self) -> usize {
        self.num_vars() - self.n - self.m
    }

    fn cut_coeffs(&self, cut: &BendersCut) -> Vec<(usize, f64)> {
        let mut coeffs: Vec<(usize, f64)> = cut.rows.iter().map(|&(k, a)| (self.v_var(k), a)).collect();
        if let Some((t, c)) = cut.eta {
            coeffs.push((self.eta_var(t), c));
        }
        coeffs
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(PscpError::Epsilon(eps))
    }
}

/// Builds the master; `fixings` are rows whose `v_k` is fixed to 1.
pub fn build_master(
    inst: &CoverInstance,
    scen: &ScenarioSet,
    eps: f64,
    mode: Mode,
    fixings: &[usize],
) -> Result<MasterModel> {
    check_eps(eps)?;
    if inst.m != scen.m() {
        return Err(PscpError::Invalid(format!(
            "covering data has {} rows, scenarios have {}",
            inst.m,
            scen.m()
        )));
    }
    if mode == Mode::Generic && scen.num_blocks() != 1 {
        return Err(PscpError::GenericNeedsOneBlock(scen.num_blocks()));
    }
    let (n, m) = (inst.n, inst.m);
    let mut lp = LpModel::new();
    for &c in &inst.cost {
        lp.add_var(0.0, 1.0, c as f64);
    }
    for _ in 0..m {
        lp.add_var(0.0, 1.0, 0.0);
    }
    for &k in fixings {
        lp.lower[n + k] = 1.0;
    }
    for (k, cols) in inst.cover.iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = cols.iter().map(|&j| (j, 1.0)).collect();
        coeffs.push((n + k, -1.0));
        lp.add_row(coeffs, Sense::Ge, 0.0);
    }
    let blocks = scen.num_blocks();
    if mode == Mode::Block {
        let floor = (1.0 - eps).ln();
        for _ in 0..blocks {
            lp.add_var(floor, 0.0, 0.0);
        }
        lp.add_row((0..blocks).map(|t| (n + m + t, 1.0)).collect(), Sense::Ge, floor);
    }
    Ok(MasterModel { mode, n, m, blocks, eps, lp, fixed_rows: fixings.to_vec(), pool: Vec::new() })
}

/// A relaxation that can be re-solved and tightened by cuts.
pub trait CutLoop {
    /// Solves the current relaxation; `None` when it is infeasible.
    fn solve_relaxation(&mut self) -> Result<Option<f64>>;
    /// Separates at the last relaxation optimum and adds the violated cuts.
    fn add_violated_cuts(&mut self) -> Result<usize>;
    fn out_of_time(&self) -> bool {
        false
    }
}

/// Stop once the bound's relative increase has been at most
/// `min_rel_increase` for `limit` consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StallRule {
    pub limit: usize,
    pub min_rel_increase: f64,
}

impl Default for StallRule {
    fn default() -> Self {
        StallRule { limit: 100, min_rel_increase: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopStop {
    NoViolatedCut,
    Stalled,
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutLoopOutcome {
    /// Relaxations solved.
    pub solves: usize,
    pub cuts: usize,
    /// Last relaxation value (`None` if infeasible).
    pub bound: Option<f64>,
    /// Length of the final run of stalled iterations.
    pub stall: usize,
    pub stop: LoopStop,
}

/// Alternates relaxation solves and separation until no cut is violated or
/// the bound stalls.
pub fn run_cut_loop<L: CutLoop + ?Sized>(relax: &mut L, rule: StallRule) -> Result<CutLoopOutcome> {
    let mut out = CutLoopOutcome { solves: 0, cuts: 0, bound: None, stall: 0, stop: LoopStop::NoViolatedCut };
    loop {
        if relax.out_of_time() {
            out.stop = LoopStop::TimeLimit;
            return Ok(out);
        }
        let bound = relax.solve_relaxation()?;
        out.solves += 1;
        let Some(bound) = bound else {
            out.bound = None;
            out.stop = LoopStop::Infeasible;
            return Ok(out);
        };
        if let Some(prev) = out.bound {
            let rel = (bound - prev) / f64::max(prev.abs(), 1e-9);
            if rel <= rule.min_rel_increase {
                out.stall += 1;
            } else {
                out.stall = 0;
            }
        }
        out.bound = Some(bound);
        if out.stall >= rule.limit {
            out.stop = LoopStop::Stalled;
            return Ok(out);
        }
        let added = relax.add_violated_cuts()?;
        if added == 0 {
            out.stop = LoopStop::NoViolatedCut;
            return Ok(out);
        }
        out.cuts += added;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

impl FromStr for SolveStatus {
    type Err = PscpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(SolveStatus::Optimal),
            "time_limit" => Ok(SolveStatus::TimeLimit),
            "node_limit" => Ok(SolveStatus::NodeLimit),
            "infeasible" => Ok(SolveStatus::Infeasible),
            _ => Err(PscpError::Invalid(format!("unknown status {:?}", s))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Fix rows forced by the probability threshold before solving.
    pub presolve: bool,
    /// Keep every generated cut with the point it was separated at.
    pub record_cuts: bool,
    pub stall: StallRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { time_limit: None, node_limit: None, presolve: true, record_cuts: false, stall: StallRule::default() }
    }
}

/// A generated cut and the master point `(v*, eta*)` it was separated at.
#[derive(Debug, Clone)]
pub struct CutRecord {
    pub cut: BendersCut,
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub nodes: usize,
    pub lp_solves: usize,
    pub cuts_generic: usize,
    pub cuts_block: usize,
    pub cuts_coverage: usize,
    pub root_iters: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Option<Vec<bool>>,
    pub objective: Option<u64>,
    pub dual_bound: f64,
    /// `(incumbent - bound) / max(|incumbent|, 1e-10)`; infinite without incumbent.
    pub gap: f64,
    pub counters: Counters,
    pub root_bound: Option<f64>,
    pub t_total: f64,
    pub t_root: f64,
    pub t_sep: f64,
    /// Global dual bound after the root loop and after every node selection.
    pub bound_history: Vec<f64>,
    pub cuts: Vec<CutRecord>,
    pub num_vars: usize,
}

fn gap(incumbent: Option<u64>, bound: f64) -> f64 {
    match incumbent {
        Some(inc) => {
            let inc = inc as f64;
            ((inc - bound) / inc.abs().max(1e-10)).max(0.0)
        }
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Structural,
    RootCut,
    NodeCut { idle: usize },
}

/// A basis snapshot keyed by row ids, so it survives rows being added or
/// dropped between the time it is taken and the time it is restored.
#[derive(Debug)]
struct StoredBasis {
    vars: Vec<VarStatus>,
    rows: Vec<(u64, VarStatus)>,
}

#[derive(Debug)]
struct Node {
    id: usize,
    parent: Option<usize>,
    bound: f64,
    seq: usize,
    fixes: Vec<(usize, bool)>,
    basis: Option<Rc<StoredBasis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node, wins
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

/// Branch-and-cut state over one master.
pub struct BendersSolver<'a> {
    inst: &'a CoverInstance,
    scen: &'a ScenarioSet,
    idx: IndexMaps,
    master: MasterModel,
    opts: SolveOptions,
    engine: Simplex,
    row_ids: Vec<u64>,
    row_kinds: Vec<RowKind>,
    /// Pool index of each cut row (`usize::MAX` for structural rows).
    row_cut: Vec<usize>,
    next_row_id: u64,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    counters: Counters,
    cuts: Vec<CutRecord>,
    log: Option<&'a mut dyn Write>,
    start: Instant,
    t_sep: Duration,
    t_root: Duration,
    root_bound: Option<f64>,
    bound_history: Vec<f64>,
    incumbent: Option<(u64, Vec<bool>)>,
    current_node: usize,
    round: usize,
    in_root: bool,
}

impl<'a> BendersSolver<'a> {
    pub fn new(
        inst: &'a CoverInstance,
        scen: &'a ScenarioSet,
        master: MasterModel,
        opts: SolveOptions,
        log: Option<&'a mut dyn Write>,
    ) -> Result<Self> {
        let engine = Simplex::new(&master.lp)?;
        let nrows = master.lp.num_rows();
        let mut solver = BendersSolver {
            inst,
            scen,
            idx: build_indices(scen),
            base_lower: master.lp.lower.clone(),
            base_upper: master.lp.upper.clone(),
            master,
            opts,
            engine,
            row_ids: (0..nrows as u64).collect(),
            row_kinds: vec![RowKind::Structural; nrows],
            row_cut: vec![usize::MAX; nrows],
            next_row_id: nrows as u64,
            counters: Counters::default(),
            cuts: Vec::new(),
            log,
            start: Instant::now(),
            t_sep: Duration::ZERO,
            t_root: Duration::ZERO,
            root_bound: None,
            bound_history: Vec::new(),
            incumbent: None,
            current_node: 0,
            round: 0,
            in_root: true,
        };
        let pool = std::mem::take(&mut solver.master.pool);
        for cut in pool {
            solver.push_cut(cut, RowKind::RootCut)?;
        }
        Ok(solver)
    }

    pub fn master(&self) -> &MasterModel {
        &self.master
    }

    fn out_of_time(&self) -> bool {
        self.opts.time_limit.is_some_and(|limit| self.start.elapsed() >= limit)
    }

    fn push_cut(&mut self, cut: BendersCut, kind: RowKind) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            writeln!(log, "{}", cut.log_line())?;
        }
        let coeffs = self.master.cut_coeffs(&cut);
        self.engine.add_row(coeffs, Sense::Ge, cut.rhs);
        self.row_ids.push(self.next_row_id);
        self.next_row_id += 1;
        self.row_kinds.push(kind);
        self.row_cut.push(self.master.pool.len());
        self.master.pool.push(cut);
        Ok(())
    }

    fn point(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let vals = self.engine.values();
        let (n, m) = (self.master.n, self.master.m);
        (vals[..n].to_vec(), vals[n..n + m].to_vec(), vals[n + m..].to_vec())
    }

    /// Separates at `(v, eta)` and adds the violated cuts; returns how many.
    fn separate_and_add(&mut self, v: &[f64], eta: &[f64], tol: f64) -> Result<usize> {
        let started = Instant::now();
        let found = match self.master.mode {
            Mode::Generic => separate_generic(v, self.master.eps, &self.idx, self.scen, tol).into_iter().collect(),
            Mode::Block => separate_blocks(v, eta, &self.idx, self.scen, tol),
        };
        self.t_sep += started.elapsed();
        let count = found.len();
        for mut cut in found {
            cut.origin = (self.current_node, self.round);
            match cut.kind {
                CutKind::Generic => self.counters.cuts_generic += 1,
                CutKind::Block => self.counters.cuts_block += 1,
                CutKind::Coverage => self.counters.cuts_coverage += 1,
            }
            if self.opts.record_cuts {
                self.cuts.push(CutRecord { cut: cut.clone(), v: v.to_vec(), eta: eta.to_vec() });
            }
            let kind = if self.in_root { RowKind::RootCut } else { RowKind::NodeCut { idle: 0 } };
            self.push_cut(cut, kind)?;
        }
        Ok(count)
    }

    /// Solves the node LP; on a numerical failure rebuilds the engine from
    /// scratch once. `None` means infeasible.
    fn solve_lp(&mut self) -> Result<Option<f64>> {
        self.counters.lp_solves += 1;
        let mut status = self.engine.solve();
        if matches!(status, LpStatus::NumericalFailure | LpStatus::Unbounded) {
            self.rebuild_engine()?;
            status = self.engine.solve();
        }
        match status {
            LpStatus::Optimal => Ok(Some(self.engine.objective())),
            LpStatus::Infeasible => Ok(None),
            other => Err(PscpError::Lp(format!("master LP ended with {:?}", other))),
        }
    }

    fn rebuild_engine(&mut self) -> Result<()> {
        let mut model = self.master.lp.clone();
        for j in 0..model.num_vars() {
            let (lo, up) = self.engine.bounds(j);
            model.lower[j] = lo;
            model.upper[j] = up;
        }
        for i in model.num_rows()..self.engine.num_rows() {
            let row = self.engine.row(i).clone();
            model.rows.push(row);
        }
        self.engine = Simplex::new(&model)?;
        Ok(())
    }

    /// Runs the root cut loop; all cuts it adds stay in the master for good.
    pub fn root_cut_loop(&mut self) -> Result<CutLoopOutcome> {
        let started = Instant::now();
        self.in_root = true;
        self.current_node = 0;
        self.round = 0;
        let rule = self.opts.stall;
        let outcome = run_cut_loop(&mut RootRelaxation { solver: self }, rule)?;
        self.counters.root_iters = outcome.solves;
        self.root_bound = outcome.bound;
        if let Some(b) = outcome.bound {
            self.bound_history.push(b);
        }
        self.t_root = started.elapsed();
        Ok(outcome)
    }

    fn snapshot(&self) -> Rc<StoredBasis> {
        let basis = self.engine.basis();
        Rc::new(StoredBasis {
            vars: basis.vars,
            rows: self.row_ids.iter().copied().zip(basis.rows).collect(),
        })
    }

    fn restore(&mut self, stored: &StoredBasis) -> Result<()> {
        let mut rows = Vec::with_capacity(self.row_ids.len());
        let mut it = stored.rows.iter().peekable();
        for &id in &self.row_ids {
            while it.peek().is_some_and(|&&(sid, _)| sid < id) {
                it.next();
            }
            match it.peek() {
                Some(&&(sid, st)) if sid == id => rows.push(st),
                _ => rows.push(VarStatus::Basic),
            }
        }
        self.engine.set_basis(&pscp_lp::Basis { vars: stored.vars.clone(), rows })?;
        Ok(())
    }

    fn apply_bounds(&mut self, fixes: &[(usize, bool)]) -> Result<()> {
        let nb = self.master.n + self.master.m;
        let mut lo = self.base_lower[..nb].to_vec();
        let mut up = self.base_upper[..nb].to_vec();
        for &(j, val) in fixes {
            let b = if val { 1.0 } else { 0.0 };
            lo[j] = lo[j].max(b);
            up[j] = up[j].min(b);
        }
        for j in 0..nb {
            if lo[j] > up[j] {
                // contradicts a presolve fixing; the node is empty
                return Err(PscpError::Invalid("contradictory fixings".into()));
            }
            if self.engine.bounds(j) != (lo[j], up[j]) {
                self.engine.set_bounds(j, lo[j], up[j])?;
            }
        }
        Ok(())
    }

    /// Drops node cuts idle for [`IDLE_LIMIT`] node LPs once the pool is over
    /// its cap of `10 (m + T)` rows.
    fn purge_idle_cuts(&mut self) {
        let cap = 10 * (self.master.m + self.master.blocks);
        let cut_rows = self.row_kinds.iter().filter(|k| !matches!(k, RowKind::Structural)).count();
        if cut_rows <= cap {
            return;
        }
        let drop: Vec<usize> = self
            .row_kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, RowKind::NodeCut { idle } if *idle >= IDLE_LIMIT))
            .map(|(i, _)| i)
            .collect();
        if drop.is_empty() {
            return;
        }
        self.engine.remove_rows(&drop);
        let mut dropped = vec![false; self.row_ids.len()];
        for &i in &drop {
            dropped[i] = true;
        }
        let mut pool_dropped = vec![false; self.master.pool.len()];
        for &i in &drop {
            pool_dropped[self.row_cut[i]] = true;
        }
        let mut i = 0;
        self.row_ids.retain(|_| {
            i += 1;
            !dropped[i - 1]
        });
        let mut i = 0;
        self.row_kinds.retain(|_| {
            i += 1;
            !dropped[i - 1]
        });
        let mut i = 0;
        self.row_cut.retain(|_| {
            i += 1;
            !dropped[i - 1]
        });
        let mut new_index = vec![usize::MAX; self.master.pool.len()];
        let mut next = 0;
        for (p, &gone) in pool_dropped.iter().enumerate() {
            if !gone {
                new_index[p] = next;
                next += 1;
            }
        }
        let mut p = 0;
        self.master.pool.retain(|_| {
            p += 1;
            !pool_dropped[p - 1]
        });
        for c in &mut self.row_cut {
            if *c != usize::MAX {
                *c = new_index[*c];
            }
        }
    }

    fn update_idle(&mut self) {
        for i in 0..self.row_kinds.len() {
            if let RowKind::NodeCut { idle } = &mut self.row_kinds[i] {
                let cut = &self.master.pool[self.row_cut[i]];
                let slack = self.engine.row_activity(i) - cut.rhs;
                *idle = if slack > IDLE_SLACK { *idle + 1 } else { 0 };
            }
        }
    }

    /// With integer costs a node is useless unless it can beat the incumbent
    /// by at least one unit.
    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some((inc, _)) => (bound - INTEGRALITY_TOL).ceil() >= *inc as f64 || bound >= *inc as f64 - 1e-9,
            None => false,
        }
    }

    fn most_fractional(&self, vals: &[f64], offset: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &a) in vals.iter().enumerate() {
            let frac = (a - a.floor()).min(a.ceil() - a);
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f) {
                best = Some((offset + j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    fn first_unfixed(&self) -> Option<usize> {
        (0..self.master.n + self.master.m)
            .map(|j| if j < self.master.m { self.master.n + j } else { j - self.master.m })
            .find(|&j| {
                let (lo, up) = self.engine.bounds(j);
                lo < up
            })
    }

    fn accept(&mut self, x: Vec<bool>) {
        let cost = self.inst.cost_of(&x);
        if self.incumbent.as_ref().is_none_or(|(c, _)| cost < *c) {
            self.incumbent = Some((cost, x));
        }
    }

    /// Processes one node; returns the branching variable and the node bound
    /// when the node has to be split.
    fn process_node(&mut self, node: &Node) -> Result<Option<(usize, f64)>> {
        self.round = 0;
        loop {
            let Some(obj) = self.solve_lp()? else {
                return Ok(None);
            };
            self.update_idle();
            let bound = obj.max(node.bound);
            if self.prunable(bound) {
                return Ok(None);
            }
            let (x, v, eta) = self.point();
            let integral = x.iter().chain(&v).all(|&a| (a - a.round()).abs() <= INTEGRALITY_TOL);
            if integral {
                let xr: Vec<bool> = x.iter().map(|&a| a > 0.5).collect();
                if check_feasible(&xr, self.inst, self.scen, self.master.eps).feasible {
                    self.accept(xr);
                    return Ok(None);
                }
                if self.round < NODE_ROUNDS {
                    let vr: Vec<f64> = v.iter().map(|a| a.round()).collect();
                    if self.separate_and_add(&vr, &eta, INTEGRAL_SEPARATION_TOL)? > 0 {
                        self.round += 1;
                        continue;
                    }
                }
                // the point is infeasible but no cut separates it numerically:
                // split on any free variable, or drop the node once all are fixed
                return Ok(self.first_unfixed().map(|j| (j, bound)));
            }
            if self.round < NODE_ROUNDS && self.separate_and_add(&v, &eta, SEPARATION_TOL)? > 0 {
                self.round += 1;
                continue;
            }
            if self.incumbent.is_none() || self.counters.nodes % HEURISTIC_INTERVAL == 1 {
                if let Some(xh) = round_master_point(self.inst, self.scen, &self.idx, self.master.eps, &x, &v) {
                    self.accept(xh);
                    if self.prunable(bound) {
                        return Ok(None);
                    }
                }
            }
            let var = self
                .most_fractional(&v, self.master.n)
                .or_else(|| self.most_fractional(&x, 0))
                .expect("a fractional point has a fractional variable");
            return Ok(Some((var, bound)));
        }
    }

    /// Best-first branch-and-cut from the current master (normally after
    /// [`Self::root_cut_loop`]).
    pub fn branch_and_benders_cut(mut self) -> Result<SolveResult> {
        self.in_root = false;
        let mut heap = BinaryHeap::new();
        let mut seq = 0;
        let root_bound = self.root_bound.unwrap_or(f64::NEG_INFINITY);
        let mut status = None;
        if self.root_bound.is_some() || self.counters.root_iters == 0 {
            heap.push(Node { id: 0, parent: None, bound: root_bound, seq, fixes: Vec::new(), basis: None });
            seq += 1;
        }
        let mut next_id = 1;
        let mut last_node: Option<usize> = None;
        let mut open_bound = None;
        while let Some(node) = heap.pop() {
            if self.prunable(node.bound) {
                continue;
            }
            if self.out_of_time() {
                status = Some(SolveStatus::TimeLimit);
                open_bound = Some(node.bound);
                break;
            }
            if self.opts.node_limit.is_some_and(|lim| self.counters.nodes >= lim) {
                status = Some(SolveStatus::NodeLimit);
                open_bound = Some(node.bound);
                break;
            }
            let global = match &self.incumbent {
                Some((inc, _)) => node.bound.min(*inc as f64),
                None => node.bound,
            };
            self.bound_history.push(global);
            self.counters.nodes += 1;
            self.current_node = node.id;
            self.purge_idle_cuts();
            self.apply_bounds(&node.fixes)?;
            if last_node != node.parent {
                if let Some(basis) = &node.basis {
                    self.restore(basis)?;
                }
            }
            last_node = Some(node.id);
            if let Some((var, bound)) = self.process_node(&node)? {
                let basis = self.snapshot();
                for val in [true, false] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((var, val));
                    heap.push(Node { id: next_id, parent: Some(node.id), bound, seq, fixes, basis: Some(basis.clone()) });
                    next_id += 1;
                    seq += 1;
                }
            }
        }
        let incumbent = self.incumbent.take();
        let objective = incumbent.as_ref().map(|(c, _)| *c);
        let (status, dual_bound) = match status {
            Some(st) => {
                let open = heap.iter().map(|n| n.bound).chain(open_bound).fold(f64::INFINITY, f64::min);
                let b = match objective {
                    Some(inc) => open.min(inc as f64),
                    None => open,
                };
                (st, b)
            }
            None => match objective {
                Some(inc) => (SolveStatus::Optimal, inc as f64),
                None => (SolveStatus::Infeasible, f64::INFINITY),
            },
        };
        let gap = if status == SolveStatus::Optimal { 0.0 } else { gap(objective, dual_bound) };
        Ok(SolveResult {
            status,
            x: incumbent.map(|(_, x)| x),
            objective,
            dual_bound,
            gap,
            num_vars: self.master.num_vars(),
            counters: self.counters,
            root_bound: self.root_bound,
            t_total: self.start.elapsed().as_secs_f64(),
            t_root: self.t_root.as_secs_f64(),
            t_sep: self.t_sep.as_secs_f64(),
            bound_history: self.bound_history,
            cuts: self.cuts,
        })
    }
}

struct RootRelaxation<'s, 'a> {
    solver: &'s mut BendersSolver<'a>,
}

impl CutLoop for RootRelaxation<'_, '_> {
    fn solve_relaxation(&mut self) -> Result<Option<f64>> {
        self.solver.solve_lp()
    }

    fn add_violated_cuts(&mut self) -> Result<usize> {
        let (_, v, eta) = self.solver.point();
        let added = self.solver.separate_and_add(&v, &eta, SEPARATION_TOL)?;
        self.solver.round += 1;
        Ok(added)
    }

    fn out_of_time(&self) -> bool {
        self.solver.out_of_time()
    }
}

/// Presolve, master construction, root cut loop and branch-and-cut in one call.
pub fn solve<'a>(
    inst: &'a CoverInstance,
    scen: &'a ScenarioSet,
    eps: f64,
    mode: Mode,
    opts: &SolveOptions,
    log: Option<&'a mut dyn Write>,
) -> Result<SolveResult> {
    let start = Instant::now();
    check_eps(eps)?;
    let fixings = if opts.presolve && inst.m == scen.m() {
        block_forced_rows(&build_indices(scen), scen, eps)
    } else {
        Vec::new()
    };
    let master = build_master(inst, scen, eps, mode, &fixings)?;
    let mut solver = BendersSolver::new(inst, scen, master, opts.clone(), log)?;
    solver.start = start;
    solver.root_cut_loop()?;
    solver.branch_and_benders_cut()
}

/// The flat `key=value` report of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: Option<u64>,
    pub dual_bound: f64,
    pub gap: f64,
    pub counters: Counters,
    pub t_total: f64,
    pub t_root: f64,
    pub t_sep: f64,
    pub seed: Option<u64>,
    pub mode: Mode,
    pub eps: f64,
    pub s: usize,
    pub blocks: usize,
}

impl SolveReport {
    pub fn new(result: &SolveResult, scen: &ScenarioSet, mode: Mode, eps: f64, seed: Option<u64>) -> Self {
        SolveReport {
            status: result.status,
            objective: result.objective,
            dual_bound: result.dual_bound,
            gap: result.gap,
            counters: result.counters.clone(),
            t_total: result.t_total,
            t_root: result.t_root,
            t_sep: result.t_sep,
            seed,
            mode,
            eps,
            s: scen.draws,
            blocks: scen.num_blocks(),
        }
    }

    /// Key-value pairs in report order.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let c = &self.counters;
        vec![
            ("status", self.status.to_string()),
            ("objective", self.objective.map_or("none".into(), |o| o.to_string())),
            ("dual_bound", format_real(self.dual_bound)),
            ("gap", format_real(self.gap)),
            ("nodes", c.nodes.to_string()),
            ("lp_solves", c.lp_solves.to_string()),
            ("cuts_generic", c.cuts_generic.to_string()),
            ("cuts_block", c.cuts_block.to_string()),
            ("cuts_coverage", c.cuts_coverage.to_string()),
            ("root_iters", c.root_iters.to_string()),
            ("t_total_s", format_real(self.t_total)),
            ("t_root_s", format_real(self.t_root)),
            ("t_sep_s", format_real(self.t_sep)),
            ("seed", self.seed.map_or("none".into(), |s| s.to_string())),
            ("mode", self.mode.to_string()),
            ("eps", format_real(self.eps)),
            ("s", self.s.to_string()),
            ("T", self.blocks.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.fields() {
            writeln!(out, "{}={}", k, v).unwrap();
        }
        out
    }
}
