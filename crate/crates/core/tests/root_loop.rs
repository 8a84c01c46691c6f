mod common;

use common::*;
use pscp::cuts::separate_generic;
use pscp::instance::build_indices;
use pscp::solver::*;
use pscp_lp::{solve_lp, LpStatus, Sense};

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn root_bound_equals_lp_over_every_generic_cut() {
    let inst = identity_cover(&[2, 3, 4]);
    let scen = three_row_scenarios();
    let idx = build_indices(&scen);
    let eps = 0.1;

    // the generic cuts are indexed by row orderings; generate all of them
    let mut full = build_master(&inst, &scen, eps, Mode::Generic, &[]).unwrap().lp;
    for order in permutations(3) {
        let mut v = vec![0.0; 3];
        for (rank, &k) in order.iter().enumerate() {
            v[k] = rank as f64 / 3.0;
        }
        let cut = separate_generic(&v, eps, &idx, &scen, f64::NEG_INFINITY).unwrap();
        full.add_row(cut.rows.iter().map(|&(k, a)| (3 + k, a)).collect(), Sense::Ge, cut.rhs);
    }
    let expected = solve_lp(&full).unwrap();
    assert_eq!(expected.status, LpStatus::Optimal);

    let master = build_master(&inst, &scen, eps, Mode::Generic, &[]).unwrap();
    let mut solver = BendersSolver::new(&inst, &scen, master, SolveOptions::default(), None).unwrap();
    let outcome = solver.root_cut_loop().unwrap();
    assert_eq!(outcome.stop, LoopStop::NoViolatedCut);
    assert!(!solver.master().pool.is_empty());
    assert!((outcome.bound.unwrap() - expected.objective).abs() < 1e-6, "{:?} vs {}", outcome.bound, expected.objective);
    let result = solver.branch_and_benders_cut().unwrap();
    assert_eq!(result.objective, Some(9));
}

#[test]
fn one_cut_reaches_a_feasible_integral_point() {
    let (inst, scen) = two_column_case();
    let master = build_master(&inst, &scen, 0.4, Mode::Generic, &[]).unwrap();
    let mut solver = BendersSolver::new(&inst, &scen, master, SolveOptions::default(), None).unwrap();
    let outcome = solver.root_cut_loop().unwrap();
    assert_eq!(outcome.cuts, 1);
    assert_eq!(outcome.solves, 2);
    assert_eq!(outcome.stop, LoopStop::NoViolatedCut);
    assert!((outcome.bound.unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn vacuous_constraint_generates_no_cut() {
    let inst = identity_cover(&[1, 1, 1]);
    let scen = single_block(3, &[(&[], 0.5), (&[0], 0.25), (&[1, 2], 0.25)]);
    for mode in [Mode::Generic, Mode::Block] {
        let master = build_master(&inst, &scen, 0.999, mode, &[]).unwrap();
        let mut solver = BendersSolver::new(&inst, &scen, master, SolveOptions::default(), None).unwrap();
        let outcome = solver.root_cut_loop().unwrap();
        assert_eq!(outcome.cuts, 0);
        assert_eq!(outcome.solves, 1);
    }
}

/// Bound grows by a relative 1e-6 per round and a cut is always found.
struct Creeping {
    bound: f64,
    solves: usize,
}

impl CutLoop for Creeping {
    fn solve_relaxation(&mut self) -> pscp::Result<Option<f64>> {
        self.solves += 1;
        self.bound *= 1.000001;
        Ok(Some(self.bound))
    }

    fn add_violated_cuts(&mut self) -> pscp::Result<usize> {
        Ok(1)
    }
}

#[test]
fn stall_rule_stops_after_limit() {
    let mut relax = Creeping { bound: 10.0, solves: 0 };
    let out = run_cut_loop(&mut relax, StallRule::default()).unwrap();
    assert_eq!(out.stop, LoopStop::Stalled);
    assert_eq!(out.stall, 100);
    assert_eq!(out.solves, 101);
    assert_eq!(out.cuts, 100);
}

#[test]
fn block_root_loop_bound_never_exceeds_optimum() {
    for seed in 0..20 {
        let case = random_case(seed);
        let master = build_master(&case.inst, &case.per_block, case.eps, Mode::Block, &[]).unwrap();
        let mut solver = BendersSolver::new(&case.inst, &case.per_block, master, SolveOptions::default(), None).unwrap();
        let outcome = solver.root_cut_loop().unwrap();
        let best = pscp::oracle::enumerate_optimal(&case.inst, &case.per_block, case.eps).unwrap().unwrap().0;
        assert!(outcome.bound.unwrap() <= best as f64 + 1e-6, "seed {}", seed);
    }
}
