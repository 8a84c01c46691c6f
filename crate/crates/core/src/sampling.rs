//! Circular and star scenario generators.
//!
//! All randomness comes from ChaCha20 seeded with the user seed. Block `t`
//! uses stream `2t` for its parameter vector and stream `2t + 1` for its
//! draws, so blocks can be regenerated independently and the output does not
//! depend on the platform.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{PscpError, Result};
use crate::instance::{format_real, normalize_uniform, BlockPartition, CoverInstance, ScenarioSet};

/// Range of the circular Bernoulli parameters.
pub const ALPHA_RANGE: (f64, f64) = (0.01, 0.0275);
/// Range of the star Poisson rates, hub included.
pub const LAMBDA_RANGE: (f64, f64) = (0.1, 0.2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    Circular,
    Star,
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistKind::Circular => "circular",
            DistKind::Star => "star",
        })
    }
}

impl FromStr for DistKind {
    type Err = PscpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular" => Ok(DistKind::Circular),
            "star" => Ok(DistKind::Star),
            _ => Err(PscpError::Invalid(format!("unknown distribution {:?}", s))),
        }
    }
}

/// Frozen parameters of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// `alpha_k` (circular) or `lambda_k` (star) per local row.
    pub rates: Vec<f64>,
    /// Shared hub rate of a star block.
    pub hub: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub kind: DistKind,
    pub seed: u64,
    pub blocks: Vec<BlockParams>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl DistributionSpec {
    /// Draws every block's parameters uniformly from the ranges above,
    /// independently per block.
    pub fn draw(kind: DistKind, partition: &BlockPartition, seed: u64) -> Self {
        let blocks = partition
            .blocks()
            .iter()
            .enumerate()
            .map(|(t, rows)| {
                let mut rng = stream_rng(seed, 2 * t as u64);
                match kind {
                    DistKind::Circular => BlockParams {
                        rates: (0..rows.len()).map(|_| rng.gen_range(ALPHA_RANGE.0..=ALPHA_RANGE.1)).collect(),
                        hub: None,
                    },
                    DistKind::Star => {
                        let rates = (0..rows.len()).map(|_| rng.gen_range(LAMBDA_RANGE.0..=LAMBDA_RANGE.1)).collect();
                        let hub = rng.gen_range(LAMBDA_RANGE.0..=LAMBDA_RANGE.1);
                        BlockParams { rates, hub: Some(hub) }
                    }
                }
            })
            .collect();
        DistributionSpec { kind, seed, blocks }
    }

    /// Exact probability that local row `l` of block `t` is 1.
    pub fn marginal(&self, t: usize, l: usize) -> f64 {
        let b = &self.blocks[t];
        match self.kind {
            DistKind::Circular => {
                let m = b.rates.len();
                if m == 1 {
                    b.rates[0]
                } else {
                    1.0 - (1.0 - b.rates[l]) * (1.0 - b.rates[(l + 1) % m])
                }
            }
            DistKind::Star => {
                let lam = b.rates[l] + b.hub.expect("star block has a hub");
                1.0 - (-lam).exp() * (1.0 + lam)
            }
        }
    }

    /// Sidecar text: kind, seed, block count, then one `params` line per block
    /// (and a `hub` line per star block).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "kind {}", self.kind).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "T {}", self.blocks.len()).unwrap();
        for (t, b) in self.blocks.iter().enumerate() {
            write!(out, "params {} {}", t + 1, b.rates.len()).unwrap();
            for &r in &b.rates {
                write!(out, " {}", format_real(r)).unwrap();
            }
            out.push('\n');
            if let Some(h) = b.hub {
                writeln!(out, "hub {} {}", t + 1, format_real(h)).unwrap();
            }
        }
        out
    }
}

/// Circular coupling: row `k` is 1 when `y_k` or its cyclic successor is 1.
pub fn circular_from_bernoulli(y: &[bool]) -> Vec<bool> {
    let m = y.len();
    (0..m).map(|k| y[k] || y[(k + 1) % m]).collect()
}

/// Star coupling: row `k` is 1 when `y_k + hub >= 2`.
pub fn star_from_poisson(y: &[u32], hub: u32) -> Vec<bool> {
    y.iter().map(|&yk| yk + hub >= 2).collect()
}

/// Poisson variate by sequential search on the inverse CDF.
pub fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.gen();
    let mut k = 0u32;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    // the cap only guards against cdf stalling below u in floating point
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

fn ones(xi: &[bool]) -> Vec<usize> {
    xi.iter().enumerate().filter(|(_, &b)| b).map(|(l, _)| l).collect()
}

/// One circular draw; returns the local rows equal to 1.
pub fn draw_circular<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<usize> {
    let y: Vec<bool> = alpha.iter().map(|&a| rng.gen::<f64>() < a).collect();
    ones(&circular_from_bernoulli(&y))
}

/// One star draw; the row variates are drawn first, then the hub.
pub fn draw_star<R: Rng + ?Sized>(lambda: &[f64], hub: f64, rng: &mut R) -> Vec<usize> {
    let y: Vec<u32> = lambda.iter().map(|&l| poisson(l, rng)).collect();
    let h = poisson(hub, rng);
    ones(&star_from_poisson(&y, h))
}

/// Per-block draws and, on request, the joint set built by concatenating
/// draw `i` of every block into one full-length scenario.
#[derive(Debug, Clone)]
pub struct SampledScenarios {
    pub per_block: ScenarioSet,
    pub joint: Option<ScenarioSet>,
}

pub fn sample_scenario_set(
    partition: &BlockPartition,
    spec: &DistributionSpec,
    s: usize,
    joint: bool,
) -> Result<SampledScenarios> {
    if spec.blocks.len() != partition.num_blocks() {
        return Err(PscpError::Invalid("parameter blocks do not match the partition".into()));
    }
    let draws: Vec<Vec<Vec<usize>>> = partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(t, rows)| {
            let params = &spec.blocks[t];
            if params.rates.len() != rows.len() {
                return Err(PscpError::Invalid(format!("block {} parameter count differs from its size", t + 1)));
            }
            let mut rng = stream_rng(spec.seed, 2 * t as u64 + 1);
            Ok((0..s)
                .map(|_| {
                    let local = match spec.kind {
                        DistKind::Circular => draw_circular(&params.rates, &mut rng),
                        DistKind::Star => draw_star(&params.rates, params.hub.unwrap_or(0.0), &mut rng),
                    };
                    local.into_iter().map(|l| rows[l]).collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let joint = if joint {
        let merged: Vec<Vec<usize>> = (0..s)
            .map(|i| draws.iter().flat_map(|d| d[i].iter().copied()).collect())
            .collect();
        Some(normalize_uniform(BlockPartition::single(partition.m())?, vec![merged])?)
    } else {
        None
    };
    let per_block = normalize_uniform(partition.clone(), draws)?;
    Ok(SampledScenarios { per_block, joint })
}

/// A random covering instance in the style of the OR-Library test sets: each
/// row is covered by about `density * n` random columns (at least two), and
/// costs are uniform on `1..=100`.
pub fn random_cover(m: usize, n: usize, density: f64, seed: u64) -> CoverInstance {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cost = (0..n).map(|_| rng.gen_range(1..=100)).collect();
    let per_row = ((density * n as f64).round() as usize).clamp(2.min(n), n);
    let cover = (0..m)
        .map(|_| {
            let mut row = rand::seq::index::sample(&mut rng, n, per_row).into_vec();
            row.sort_unstable();
            row
        })
        .collect();
    CoverInstance::new(n, cost, cover).expect("generated rows are valid")
}
