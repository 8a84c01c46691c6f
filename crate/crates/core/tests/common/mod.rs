#![allow(dead_code)]

use pscp::instance::{normalize_scenarios, BlockPartition, CoverInstance, ScenarioSet};
use pscp::sampling::{random_cover, sample_scenario_set, DistKind, DistributionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `A = I_m` with the given costs.
pub fn identity_cover(cost: &[u64]) -> CoverInstance {
    let m = cost.len();
    CoverInstance::new(m, cost.to_vec(), (0..m).map(|k| vec![k]).collect()).unwrap()
}

/// Single-block set from 0-based scenarios with explicit probabilities.
pub fn single_block(m: usize, scenarios: &[(&[usize], f64)]) -> ScenarioSet {
    let draws = scenarios.iter().map(|(rows, p)| (rows.to_vec(), *p)).collect();
    normalize_scenarios(BlockPartition::single(m).unwrap(), scenarios.len(), vec![draws]).unwrap()
}

/// Three rows, three scenarios, p = (0.40, 0.35, 0.25), with row scenario
/// sets S_1 = {1,2}, S_2 = {2,3}, S_3 = {1,3}.
pub fn three_row_scenarios() -> ScenarioSet {
    single_block(3, &[(&[0, 2], 0.40), (&[0, 1], 0.35), (&[1, 2], 0.25)])
}

/// Two rows, scenarios {1,2} and {2} with probability 1/2 each, so that
/// S_1 = {1} and S_2 = {1,2}.
pub fn two_row_block() -> ScenarioSet {
    single_block(2, &[(&[0, 1], 0.5), (&[1], 0.5)])
}

/// A = I_2, c = (1, 2), xi_1 = (1,0) w.p. 0.6 and xi_2 = (0,1) w.p. 0.4.
pub fn two_column_case() -> (CoverInstance, ScenarioSet) {
    (identity_cover(&[1, 2]), single_block(2, &[(&[0], 0.6), (&[1], 0.4)]))
}

/// A small random instance of the kind used by the equivalence checks.
#[derive(Debug, Clone)]
pub struct Case {
    pub inst: CoverInstance,
    pub per_block: ScenarioSet,
    pub joint: ScenarioSet,
    pub eps: f64,
    pub kind: DistKind,
    pub seed: u64,
}

/// n <= 10, m <= 8, s <= 40, eps in {0.05, 0.1, 0.3}, T in {1, 2}.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=8);
    let n = rng.gen_range(2..=10);
    let s = rng.gen_range(5..=40);
    let eps = [0.05, 0.1, 0.3][rng.gen_range(0..3)];
    let kind = if rng.gen_bool(0.5) { DistKind::Circular } else { DistKind::Star };
    let blocks = if rng.gen_bool(0.5) { 1 } else { 2 };
    let density = rng.gen_range(0.1..0.4);
    let inst = random_cover(m, n, density, seed ^ 0x5eed);
    let partition = if blocks == 1 {
        BlockPartition::single(m).unwrap()
    } else {
        BlockPartition::consecutive(m, m.div_ceil(2)).unwrap()
    };
    let mut spec = DistributionSpec::draw(kind, &partition, seed);
    // half of the cases inflate the rates so that small instances are not
    // trivially satisfied by covering nothing
    let boost = if rng.gen_bool(0.5) { rng.gen_range(1.0..12.0) } else { 1.0 };
    for b in &mut spec.blocks {
        for r in &mut b.rates {
            *r = (*r * boost).min(0.9);
        }
    }
    let sampled = sample_scenario_set(&partition, &spec, s, true).unwrap();
    Case { inst, per_block: sampled.per_block, joint: sampled.joint.unwrap(), eps, kind, seed }
}
