mod common;

use common::*;
use pscp::instance::build_indices;
use pscp::oracle::enumerate_optimal;
use pscp::solver::{build_master, check_feasible, solve, Mode, SolveOptions, SolveStatus};

fn solve_default(inst: &pscp::instance::CoverInstance, scen: &pscp::instance::ScenarioSet, eps: f64, mode: Mode) -> pscp::solver::SolveResult {
    solve(inst, scen, eps, mode, &SolveOptions::default(), None).unwrap()
}

#[test]
fn two_column_case_needs_both_columns_at_eps_03() {
    let (inst, scen) = two_column_case();
    for mode in [Mode::Generic, Mode::Block] {
        let r = solve_default(&inst, &scen, 0.3, mode);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(3));
        assert_eq!(r.x, Some(vec![true, true]));
        assert_eq!(r.gap, 0.0);
    }
}

#[test]
fn two_column_case_takes_cheap_column_at_eps_04() {
    let (inst, scen) = two_column_case();
    for mode in [Mode::Generic, Mode::Block] {
        let r = solve_default(&inst, &scen, 0.4, mode);
        assert_eq!(r.objective, Some(1));
        assert_eq!(r.x, Some(vec![true, false]));
    }
    assert_eq!(solve_default(&inst, &scen, 0.99, Mode::Generic).objective, Some(1));
}

#[test]
fn feasibility_check_sums_covered_scenarios() {
    let (inst, scen) = two_column_case();
    let full = check_feasible(&[true, true], &inst, &scen, 0.3);
    assert!(full.feasible);
    assert_eq!(full.probability, 1.0);
    let half = check_feasible(&[true, false], &inst, &scen, 0.3);
    assert!(!half.feasible);
    assert_eq!(half.probability, 0.6);
    let block = two_row_block();
    let inst2 = identity_cover(&[1, 1]);
    assert_eq!(check_feasible(&[true, true], &inst2, &block, 0.1).probability, 1.0);
}

#[test]
fn vacuous_constraint_costs_nothing() {
    // all mass on the empty scenario except 0.05
    let inst = identity_cover(&[3, 4]);
    let scen = single_block(2, &[(&[], 0.95), (&[0, 1], 0.05)]);
    for mode in [Mode::Generic, Mode::Block] {
        let r = solve_default(&inst, &scen, 0.1, mode);
        assert_eq!(r.objective, Some(0));
        assert_eq!(r.counters.cuts_generic + r.counters.cuts_block + r.counters.cuts_coverage, 0);
    }
}

#[test]
fn master_size_ignores_scenarios() {
    let inst = identity_cover(&[2, 3, 4]);
    let scen = three_row_scenarios();
    let master = build_master(&inst, &scen, 0.1, Mode::Generic, &[]).unwrap();
    assert_eq!(master.num_vars(), 6);
    assert_eq!(master.lp.num_rows(), 3);
    assert!(master.pool.is_empty());
    let block = build_master(&inst, &scen, 0.1, Mode::Block, &[]).unwrap();
    assert_eq!(block.num_vars(), 7);
    let eta = block.eta_var(0);
    assert_eq!(block.lp.lower[eta], 0.9f64.ln());
    assert!((block.lp.lower[eta] + 0.10536051565782628).abs() < 1e-15);
    assert_eq!(block.lp.upper[eta], 0.0);
}

#[test]
fn invalid_eps_and_mode_mismatch_are_rejected() {
    let inst = identity_cover(&[2, 3, 4]);
    let scen = three_row_scenarios();
    assert!(build_master(&inst, &scen, 1.5, Mode::Generic, &[]).is_err());
    assert!(build_master(&inst, &scen, 0.0, Mode::Generic, &[]).is_err());
    let two = pscp::instance::normalize_uniform(
        pscp::instance::BlockPartition::from_sizes(&[1, 2]).unwrap(),
        vec![vec![vec![0]], vec![vec![1, 2]]],
    )
    .unwrap();
    assert!(matches!(
        build_master(&inst, &two, 0.1, Mode::Generic, &[]),
        Err(pscp::PscpError::GenericNeedsOneBlock(2))
    ));
}

#[test]
fn three_row_instance_matches_enumeration() {
    let inst = identity_cover(&[2, 3, 4]);
    let scen = three_row_scenarios();
    let (best, x) = enumerate_optimal(&inst, &scen, 0.1).unwrap().unwrap();
    // xi_1 = {1,3} (0.40) and xi_2 = {1,2} (0.35) give 0.75 < 0.9, so all rows
    assert_eq!((best, x.clone()), (9, vec![true, true, true]));
    for mode in [Mode::Generic, Mode::Block] {
        let r = solve_default(&inst, &scen, 0.1, mode);
        assert_eq!(r.objective, Some(best));
    }
    // every pair of rows covers exactly one scenario, so at eps = 0.3 all
    // rows are still needed; at eps = 0.6 rows {1,3} (cost 6) reach 0.40
    assert_eq!(enumerate_optimal(&inst, &scen, 0.3).unwrap().unwrap().0, 9);
    let (best6, x6) = enumerate_optimal(&inst, &scen, 0.6).unwrap().unwrap();
    assert_eq!((best6, x6), (6, vec![true, false, true]));
    for mode in [Mode::Generic, Mode::Block] {
        assert_eq!(solve_default(&inst, &scen, 0.6, mode).objective, Some(6));
    }
}

#[test]
fn random_small_cases_match_enumeration() {
    for seed in 0..40 {
        let case = random_case(seed);
        let expected = enumerate_optimal(&case.inst, &case.per_block, case.eps).unwrap().map(|(c, _)| c);
        let block = solve_default(&case.inst, &case.per_block, case.eps, Mode::Block);
        assert_eq!(block.objective, expected, "block mode, seed {}", seed);
        let expected_joint = enumerate_optimal(&case.inst, &case.joint, case.eps).unwrap().map(|(c, _)| c);
        let generic = solve_default(&case.inst, &case.joint, case.eps, Mode::Generic);
        assert_eq!(generic.objective, expected_joint, "generic mode, seed {}", seed);
        for r in [&block, &generic] {
            assert!(r.bound_history.windows(2).all(|w| w[1] >= w[0] - 1e-9), "seed {}", seed);
        }
    }
}

#[test]
fn presolve_does_not_change_optimum() {
    for seed in 100..130 {
        let case = random_case(seed);
        let mut opts = SolveOptions::default();
        let with = solve(&case.inst, &case.per_block, case.eps, Mode::Block, &opts, None).unwrap();
        opts.presolve = false;
        let without = solve(&case.inst, &case.per_block, case.eps, Mode::Block, &opts, None).unwrap();
        assert_eq!(with.objective, without.objective, "seed {}", seed);
    }
}

#[test]
fn indices_transpose() {
    let scen = three_row_scenarios();
    let idx = build_indices(&scen);
    let b = &idx.blocks[0];
    for (l, set) in b.scenarios_of_row.iter().enumerate() {
        for &i in set {
            assert!(b.rows_of_scenario[i].contains(&l));
        }
    }
}

#[test]
fn rounding_heuristic_returns_feasible_covers() {
    use pscp::heuristic::round_master_point;
    for seed in 0..40 {
        let case = common::random_case(seed);
        for scen in [&case.joint, &case.per_block] {
            let idx = pscp::instance::build_indices(scen);
            let best = pscp::oracle::enumerate_optimal(&case.inst, scen, case.eps).unwrap();
            for frac in [0.0, 0.3, 0.7, 1.0] {
                let x_star = vec![frac; case.inst.n];
                let v_star: Vec<f64> = (0..case.inst.m).map(|k| (k as f64 * 0.37 + frac).fract()).collect();
                let got = round_master_point(&case.inst, scen, &idx, case.eps, &x_star, &v_star);
                match (&got, &best) {
                    (Some(x), Some((opt, _))) => {
                        assert!(check_feasible(x, &case.inst, scen, case.eps).feasible, "seed {}", seed);
                        assert!(case.inst.cost_of(x) >= *opt);
                    }
                    (None, None) => {}
                    _ => panic!("seed {}: heuristic {:?} vs optimum {:?}", seed, got, best),
                }
            }
        }
    }
}
