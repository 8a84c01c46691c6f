mod common;

use common::*;
use proptest::prelude::*;
use pscp::cuts::*;
use pscp::instance::{build_indices, ScenarioSet};
use pscp::oracle::{feasible_patterns, lp_psi_oracle};

/// `sum_i p_i min_{k in xi_i} v_k + mass` of block `t`, straight from the
/// scenario lists.
fn min_path(v: &[f64], scen: &ScenarioSet, t: usize) -> f64 {
    let b = &scen.blocks[t];
    b.satisfied_mass
        + b.scenarios
            .iter()
            .zip(&b.prob)
            .map(|(rows, &p)| p * rows.iter().map(|&k| v[k]).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
}

#[test]
fn generic_value_and_cut_on_three_rows() {
    let scen = three_row_scenarios();
    let idx = build_indices(&scen);
    let v = [0.1, 0.5, 0.2];
    let psi = psi_generic(&v, 0.1, &idx, &scen);
    assert!((psi - 0.775).abs() < 1e-15, "{}", psi);
    let cut = separate_generic(&v, 0.1, &idx, &scen, SEPARATION_TOL).unwrap();
    assert_eq!(cut.kind, CutKind::Generic);
    assert_eq!(cut.rows.len(), 2);
    assert_eq!(cut.rows[0].0, 0);
    assert!((cut.rows[0].1 - 0.75).abs() < 1e-15);
    assert_eq!(cut.rows[1].0, 2);
    assert!((cut.rows[1].1 - 0.25).abs() < 1e-15);
    assert!((cut.rhs - 0.9).abs() < 1e-15);
    assert_eq!(cut.violation(&v, &[]), psi);
    assert!((lp_psi_oracle(&v, 0.1, &idx, &scen).unwrap() - 0.775).abs() < 1e-12);
}

#[test]
fn generic_edge_points() {
    let scen = three_row_scenarios();
    let idx = build_indices(&scen);
    assert!((psi_generic(&[1.0; 3], 0.1, &idx, &scen) + 0.1).abs() < 1e-15);
    assert!((psi_generic(&[0.0; 3], 0.1, &idx, &scen) - 0.9).abs() < 1e-15);
    assert!(separate_generic(&[1.0; 3], 0.1, &idx, &scen, SEPARATION_TOL).is_none());
    assert!((lp_psi_oracle(&[1.0; 3], 0.1, &idx, &scen).unwrap() + 0.1).abs() < 1e-12);
    assert!((lp_psi_oracle(&[0.0; 3], 0.1, &idx, &scen).unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn block_value_and_tangent_cut() {
    let scen = two_row_block();
    let idx = build_indices(&scen);
    let v = [0.4, 0.3];
    let psi = psi_block(&v, -0.5, 0, &idx, &scen);
    assert!((psi - (-0.5 - 0.3f64.ln())).abs() < 1e-15);
    assert!((psi - 0.7039728043259361).abs() < 1e-12);
    let cut = separate_block(&v, -0.5, 0, &idx, &scen, SEPARATION_TOL).unwrap();
    assert_eq!(cut.kind, CutKind::Block);
    assert_eq!(cut.rows, vec![(1, 1.0)]);
    let (t, c) = cut.eta.unwrap();
    assert_eq!(t, 0);
    assert!((c + 0.3).abs() < 1e-15);
    assert!((cut.rhs - 0.6611918412977808).abs() < 1e-12);
    // tight at eta = ln delta
    assert!(cut.violation(&v, &[0.3f64.ln()]).abs() < 1e-12);
}

#[test]
fn block_edge_points() {
    let scen = two_row_block();
    let idx = build_indices(&scen);
    assert_eq!(psi_block(&[1.0, 1.0], 0.0, 0, &idx, &scen), 0.0);
    assert!(separate_block(&[1.0, 1.0], 0.0, 0, &idx, &scen, SEPARATION_TOL).is_none());
    assert_eq!(psi_block(&[0.0, 0.0], -3.0, 0, &idx, &scen), f64::INFINITY);
    let cov = separate_block(&[0.0, 0.0], -0.05, 0, &idx, &scen, SEPARATION_TOL).unwrap();
    assert_eq!(cov.kind, CutKind::Coverage);
    assert_eq!(cov.rows, vec![(0, 1.0), (1, 1.0)]);
    assert_eq!(cov.rhs, 1.0);
    assert!(cov.eta.is_none());
}

#[test]
fn coverage_prefix_stops_once_all_scenarios_are_hit() {
    // row 3 alone covers both scenarios; ties broken by index put it last
    let scen = single_block(3, &[(&[0, 2], 0.5), (&[1, 2], 0.5)]);
    let idx = build_indices(&scen);
    let cov = separate_block(&[0.0, 0.0, 0.0], 0.0, 0, &idx, &scen, SEPARATION_TOL).unwrap();
    assert_eq!(cov.rows, vec![(0, 1.0), (1, 1.0)]);
    // once row 3 sorts first it covers everything by itself
    let cov = separate_block(&[1e-12, 1e-12, 0.0], 0.0, 0, &idx, &scen, SEPARATION_TOL).unwrap();
    assert_eq!(cov.kind, CutKind::Coverage);
    assert_eq!(cov.rows, vec![(2, 1.0)]);
}

#[test]
fn log_line_lists_terms() {
    let scen = two_row_block();
    let idx = build_indices(&scen);
    let mut cut = separate_block(&[0.4, 0.3], -0.5, 0, &idx, &scen, SEPARATION_TOL).unwrap();
    cut.origin = (4, 2);
    let rhs = pscp::instance::format_real(cut.rhs);
    assert!(rhs.starts_with("0.661191841297780"));
    assert_eq!(cut.log_line(), format!("block 4 2 {} 1 2:1 eta:1:-0.29999999999999999", rhs));
}

#[test]
fn at_most_one_cut_per_block() {
    for seed in 0..30 {
        let case = random_case(seed);
        let idx = build_indices(&case.per_block);
        let v = vec![0.0; case.inst.m];
        let eta = vec![0.0; case.per_block.num_blocks()];
        let cuts = separate_blocks(&v, &eta, &idx, &case.per_block, SEPARATION_TOL);
        assert!(cuts.len() <= case.per_block.num_blocks());
        let mut blocks: Vec<usize> = cuts.iter().filter_map(|c| c.eta.map(|e| e.0)).collect();
        blocks.dedup();
        assert_eq!(blocks.len(), cuts.iter().filter(|c| c.eta.is_some()).count());
    }
}

fn arb_point(m: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(0.5), 0.0f64..=1.0], m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generic_cut_matches_independent_evaluations(seed in 0u64..10_000, raw in arb_point(8), eps in 0.01f64..0.5) {
        let case = random_case(seed);
        let v = &raw[..case.inst.m];
        let scen = &case.joint;
        let idx = build_indices(scen);
        let psi = psi_generic(v, eps, &idx, scen);
        let direct = (1.0 - eps) - min_path(v, scen, 0);
        prop_assert!((psi - direct).abs() <= 1e-12);
        prop_assert!((psi - lp_psi_oracle(v, eps, &idx, scen).unwrap()).abs() <= 1e-9);
        let cut = separate_generic(v, eps, &idx, scen, f64::NEG_INFINITY).unwrap();
        let mass: f64 = cut.rows.iter().map(|r| r.1).sum();
        prop_assert!((mass - (1.0 - scen.blocks[0].satisfied_mass)).abs() <= 1e-12);
        prop_assert_eq!(cut.violation(v, &[]), psi);
        // valid at every feasible 0-1 pattern
        for pattern in feasible_patterns(scen, eps).unwrap() {
            let pv: Vec<f64> = pattern.iter().map(|&b| b as u8 as f64).collect();
            prop_assert!(cut.violation(&pv, &[]) <= 1e-9);
        }
    }

    #[test]
    fn block_cut_supports_log_probability(seed in 0u64..10_000, raw in arb_point(8), probes in proptest::collection::vec(arb_point(8), 20)) {
        let case = random_case(seed);
        let scen = &case.per_block;
        let idx = build_indices(scen);
        let v = &raw[..case.inst.m];
        for t in 0..scen.num_blocks() {
            let delta = min_path(v, scen, t);
            prop_assume!(delta > DELTA_FLOOR);
            prop_assert!((block_delta(v, t, &idx, scen) - delta).abs() <= 1e-12);
            let Some(cut) = separate_block(v, 0.0, t, &idx, scen, f64::NEG_INFINITY) else { continue };
            if cut.kind != CutKind::Block {
                continue;
            }
            let mut eta = vec![0.0; scen.num_blocks()];
            eta[t] = delta.ln();
            prop_assert!(cut.violation(v, &eta).abs() <= 1e-9, "not tangent");
            for probe in &probes {
                let p = &probe[..case.inst.m];
                let d = min_path(p, scen, t);
                if d > 0.0 {
                    eta[t] = d.ln();
                    prop_assert!(cut.violation(p, &eta) <= 1e-9);
                }
            }
        }
    }
}
