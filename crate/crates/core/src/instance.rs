//! Covering data, scenario data, their text formats, and the row/scenario
//! incidence maps used by separation.
//!
//! Indices are 0-based in memory and 1-based in every file format.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{PscpError, Result};

/// Tolerance on `sum(p) + satisfied_mass = 1`.
pub const MASS_TOL: f64 = 1e-12;

/// Formats a real with 17 significant digits, like C's `%.17g`.
///
/// Seventeen digits are enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = trim_fraction(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mant, sign, exp.abs())
    } else {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Deterministic set covering data: row `k` is covered by the columns in
/// `cover[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverInstance {
    pub m: usize,
    pub n: usize,
    pub cover: Vec<Vec<usize>>,
    pub cost: Vec<u64>,
}

impl CoverInstance {
    /// Validates and sorts the row lists.
    pub fn new(n: usize, cost: Vec<u64>, mut cover: Vec<Vec<usize>>) -> Result<Self> {
        if cost.len() != n {
            return Err(PscpError::Invalid(format!("{} costs for {} columns", cost.len(), n)));
        }
        for (k, row) in cover.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(PscpError::Invalid(format!("row {} has no covering column", k + 1)));
            }
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(PscpError::Invalid(format!("row {} lists a column twice", k + 1)));
            }
            if let Some(&j) = row.iter().find(|&&j| j >= n) {
                return Err(PscpError::Invalid(format!("row {} references column {}", k + 1, j + 1)));
            }
        }
        Ok(CoverInstance { m: cover.len(), n, cover, cost })
    }

    /// Rows covered by the 0-1 vector `x`.
    pub fn covered_rows(&self, x: &[bool]) -> Vec<bool> {
        self.cover.iter().map(|row| row.iter().any(|&j| x[j])).collect()
    }

    pub fn cost_of(&self, x: &[bool]) -> u64 {
        x.iter().zip(&self.cost).filter(|(&b, _)| b).map(|(_, &c)| c).sum()
    }

    /// Total number of nonzeros of the covering matrix.
    pub fn nonzeros(&self) -> usize {
        self.cover.iter().map(Vec::len).sum()
    }
}

/// Reads the OR-Library SCP format: `m n`, `n` costs, then per row a count
/// followed by that many 1-based column indices.
pub fn parse_orlib(text: &str) -> Result<CoverInstance> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(i, line)| line.split_whitespace().map(move |t| (i + 1, t)));
    let mut last_line = 1;
    let mut next = |what: &str| -> Result<u64> {
        match tokens.next() {
            Some((line, tok)) => {
                last_line = line;
                tok.parse::<u64>()
                    .map_err(|_| PscpError::parse(line, format!("expected a nonnegative integer for {}, got {:?}", what, tok)))
            }
            None => Err(PscpError::parse(last_line, format!("input ends before {}", what))),
        }
    };
    let m = next("the row count")? as usize;
    let n = next("the column count")? as usize;
    let mut cost = Vec::with_capacity(n);
    for _ in 0..n {
        cost.push(next("a column cost")?);
    }
    let mut cover = Vec::with_capacity(m);
    for k in 0..m {
        let count = next("a row length")? as usize;
        if count == 0 {
            return Err(PscpError::parse(last_line, format!("row {} has no covering column", k + 1)));
        }
        let mut row = Vec::with_capacity(count);
        for _ in 0..count {
            let j = next("a column index")? as usize;
            if j == 0 || j > n {
                return Err(PscpError::parse(last_line, format!("column index {} outside [1, {}]", j, n)));
            }
            row.push(j - 1);
        }
        row.sort_unstable();
        if row.windows(2).any(|w| w[0] == w[1]) {
            return Err(PscpError::parse(last_line, format!("row {} lists a column twice", k + 1)));
        }
        cover.push(row);
    }
    Ok(CoverInstance { m, n, cover, cost })
}

pub fn serialize_orlib(inst: &CoverInstance) -> String {
    let mut out = String::new();
    writeln!(out, " {} {}", inst.m, inst.n).unwrap();
    write_wrapped(&mut out, inst.cost.iter().map(|c| c.to_string()));
    for row in &inst.cover {
        writeln!(out, " {}", row.len()).unwrap();
        write_wrapped(&mut out, row.iter().map(|j| (j + 1).to_string()));
    }
    out
}

fn write_wrapped(out: &mut String, items: impl Iterator<Item = String>) {
    let mut on_line = 0;
    for item in items {
        out.push(' ');
        out.push_str(&item);
        on_line += 1;
        if on_line == 12 {
            out.push('\n');
            on_line = 0;
        }
    }
    if on_line > 0 {
        out.push('\n');
    }
}

/// A partition of the rows into blocks whose random subvectors are
/// independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    local: Vec<usize>,
}

impl BlockPartition {
    pub fn new(m: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; m];
        let mut local = vec![0; m];
        for (t, rows) in blocks.iter_mut().enumerate() {
            if rows.is_empty() {
                return Err(PscpError::Invalid(format!("block {} is empty", t + 1)));
            }
            rows.sort_unstable();
            for (l, &k) in rows.iter().enumerate() {
                if k >= m {
                    return Err(PscpError::Invalid(format!("block {} has row {} beyond {}", t + 1, k + 1, m)));
                }
                if block_of[k] != usize::MAX {
                    return Err(PscpError::Invalid(format!("row {} appears in two blocks", k + 1)));
                }
                block_of[k] = t;
                local[k] = l;
            }
        }
        if let Some(k) = block_of.iter().position(|&t| t == usize::MAX) {
            return Err(PscpError::Invalid(format!("row {} belongs to no block", k + 1)));
        }
        Ok(BlockPartition { blocks, block_of, local })
    }

    /// Consecutive blocks with the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&size| {
                let b: Vec<usize> = (start..start + size).collect();
                start += size;
                b
            })
            .collect();
        Self::new(start, blocks)
    }

    /// Consecutive blocks of `size` rows; the last block takes the remainder.
    pub fn consecutive(m: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(PscpError::Invalid("block size must be positive".into()));
        }
        let mut sizes = vec![size; m / size];
        if !m.is_multiple_of(size) {
            sizes.push(m % size);
        }
        Self::from_sizes(&sizes)
    }

    pub fn single(m: usize) -> Result<Self> {
        Self::from_sizes(&[m])
    }

    pub fn m(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, t: usize) -> &[usize] {
        &self.blocks[t]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, k: usize) -> usize {
        self.block_of[k]
    }

    pub fn local_index(&self, k: usize) -> usize {
        self.local[k]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// True when block 1 holds rows `1..=m_1`, block 2 the next `m_2`, and so on.
    pub fn is_consecutive(&self) -> bool {
        self.block_of.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Stored scenarios of one block: each a nonempty ascending set of global
/// row ids, with positive probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScenarios {
    pub scenarios: Vec<Vec<usize>>,
    pub prob: Vec<f64>,
    /// Probability of the removed all-zero draws, which every cover satisfies.
    pub satisfied_mass: f64,
}

impl BlockScenarios {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// A finite distribution of the right-hand side, factored over blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// Number of draws per block before merging.
    pub draws: usize,
    pub partition: BlockPartition,
    pub blocks: Vec<BlockScenarios>,
}

impl ScenarioSet {
    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Sum of scenario sizes over all blocks.
    pub fn support_size(&self) -> usize {
        self.blocks.iter().flat_map(|b| &b.scenarios).map(Vec::len).sum()
    }

    /// Projects the scenarios of a single-block set onto the blocks of
    /// `partition` and renormalizes. When all probabilities are multiples of
    /// `1 / draws` the merge runs on integer counts, so the marginals of a
    /// sampled joint set equal the sampled per-block sets bit for bit.
    pub fn marginalize(&self, partition: &BlockPartition) -> Result<ScenarioSet> {
        if self.num_blocks() != 1 {
            return Err(PscpError::Invalid("marginalization needs a single-block source".into()));
        }
        if partition.m() != self.m() {
            return Err(PscpError::Invalid("partition row count differs".into()));
        }
        let src = &self.blocks[0];
        let t_new = partition.num_blocks();
        let split = |scen: &[usize]| {
            let mut parts: Vec<Vec<usize>> = vec![Vec::new(); t_new];
            for &k in scen {
                parts[partition.block_of(k)].push(k);
            }
            parts
        };
        let s = self.draws as f64;
        let count = |p: f64| {
            let c = (p * s).round();
            (c / s == p).then_some(c as u64)
        };
        let counts: Option<Vec<u64>> = src.prob.iter().map(|&p| count(p)).collect();
        if let (Some(counts), Some(zero)) = (counts, count(src.satisfied_mass)) {
            let mut draws: Vec<Vec<(Vec<usize>, u64)>> = vec![vec![(Vec::new(), zero)]; t_new];
            for (scen, c) in src.scenarios.iter().zip(counts) {
                for (t, part) in split(scen).into_iter().enumerate() {
                    draws[t].push((part, c));
                }
            }
            return normalize_counts(partition.clone(), self.draws, draws);
        }
        let mut draws: Vec<Vec<(Vec<usize>, f64)>> = vec![vec![(Vec::new(), src.satisfied_mass)]; t_new];
        for (scen, &p) in src.scenarios.iter().zip(&src.prob) {
            for (t, part) in split(scen).into_iter().enumerate() {
                draws[t].push((part, p));
            }
        }
        normalize_scenarios(partition.clone(), self.draws, draws)
    }
}

fn check_block_rows(partition: &BlockPartition, t: usize, rows: &mut Vec<usize>) -> Result<()> {
    rows.sort_unstable();
    rows.dedup();
    for &k in rows.iter() {
        if k >= partition.m() || partition.block_of(k) != t {
            return Err(PscpError::Invalid(format!("scenario row {} lies outside block {}", k + 1, t + 1)));
        }
    }
    Ok(())
}

/// Merges weighted draws per block: empty draws become satisfied mass,
/// identical draws are merged (first-appearance order), and each block's
/// weights must sum to 1 within [`MASS_TOL`].
pub fn normalize_scenarios(
    partition: BlockPartition,
    draws: usize,
    per_block: Vec<Vec<(Vec<usize>, f64)>>,
) -> Result<ScenarioSet> {
    if per_block.len() != partition.num_blocks() {
        return Err(PscpError::Invalid("one draw list per block expected".into()));
    }
    let mut blocks = Vec::with_capacity(per_block.len());
    for (t, raw) in per_block.into_iter().enumerate() {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut out = BlockScenarios { scenarios: Vec::new(), prob: Vec::new(), satisfied_mass: 0.0 };
        let mut total = 0.0;
        for (mut rows, w) in raw {
            if !w.is_finite() || w < 0.0 {
                return Err(PscpError::Invalid(format!("scenario weight {} is not a probability", w)));
            }
            total += w;
            if w == 0.0 {
                continue;
            }
            check_block_rows(&partition, t, &mut rows)?;
            if rows.is_empty() {
                out.satisfied_mass += w;
            } else if let Some(&i) = index.get(&rows) {
                out.prob[i] += w;
            } else {
                index.insert(rows.clone(), out.scenarios.len());
                out.scenarios.push(rows);
                out.prob.push(w);
            }
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(PscpError::Invalid(format!("block {} weights sum to {}", t + 1, format_real(total))));
        }
        blocks.push(out);
    }
    Ok(ScenarioSet { draws, partition, blocks })
}

fn normalize_counts(
    partition: BlockPartition,
    draws: usize,
    per_block: Vec<Vec<(Vec<usize>, u64)>>,
) -> Result<ScenarioSet> {
    let s = draws as f64;
    let mut blocks = Vec::with_capacity(per_block.len());
    for (t, raw) in per_block.into_iter().enumerate() {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut scenarios = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut zero = 0u64;
        let mut total = 0u64;
        for (mut rows, c) in raw {
            total += c;
            if c == 0 {
                continue;
            }
            check_block_rows(&partition, t, &mut rows)?;
            if rows.is_empty() {
                zero += c;
            } else if let Some(&i) = index.get(&rows) {
                counts[i] += c;
            } else {
                index.insert(rows.clone(), scenarios.len());
                scenarios.push(rows);
                counts.push(c);
            }
        }
        if total != draws as u64 {
            return Err(PscpError::Invalid(format!("block {} has {} draws, expected {}", t + 1, total, draws)));
        }
        blocks.push(BlockScenarios {
            scenarios,
            prob: counts.iter().map(|&c| c as f64 / s).collect(),
            satisfied_mass: zero as f64 / s,
        });
    }
    Ok(ScenarioSet { draws, partition, blocks })
}

/// Normalizes `s` equally likely draws per block. Probabilities are computed
/// from integer multiplicities (`count / s`), so they do not depend on the
/// order in which duplicates are met.
pub fn normalize_uniform(partition: BlockPartition, per_block: Vec<Vec<Vec<usize>>>) -> Result<ScenarioSet> {
    let s = per_block.first().map_or(0, Vec::len);
    if s == 0 {
        return Err(PscpError::Invalid("at least one draw per block is required".into()));
    }
    if per_block.iter().any(|d| d.len() != s) {
        return Err(PscpError::Invalid("every block needs the same number of draws".into()));
    }
    let counted = per_block
        .into_iter()
        .map(|d| d.into_iter().map(|rows| (rows, 1u64)).collect())
        .collect();
    normalize_counts(partition, s, counted)
}

/// Row/scenario incidence of one block, with rows and scenarios in local
/// numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    /// Global ids of the block's rows; local row `l` is `rows[l]`.
    pub rows: Vec<usize>,
    /// For each local row, the scenarios in which it is 1.
    pub scenarios_of_row: Vec<Vec<usize>>,
    /// For each scenario, its local rows.
    pub rows_of_scenario: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMaps {
    pub blocks: Vec<BlockIndex>,
}

pub fn build_indices(scen: &ScenarioSet) -> IndexMaps {
    let partition = &scen.partition;
    let blocks = scen
        .blocks
        .iter()
        .enumerate()
        .map(|(t, b)| {
            let rows = partition.block(t).to_vec();
            let mut scenarios_of_row = vec![Vec::new(); rows.len()];
            let rows_of_scenario = b
                .scenarios
                .iter()
                .enumerate()
                .map(|(i, sc)| {
                    sc.iter()
                        .map(|&k| {
                            let l = partition.local_index(k);
                            scenarios_of_row[l].push(i);
                            l
                        })
                        .collect()
                })
                .collect();
            BlockIndex { rows, scenarios_of_row, rows_of_scenario }
        })
        .collect();
    IndexMaps { blocks }
}

/// Writes the scenario file format: `s m T`, the block sizes, one line
/// `p c r_1 .. r_c` per stored scenario (1-based global rows), then one
/// satisfied-mass line per block.
pub fn write_scenarios(scen: &ScenarioSet) -> Result<String> {
    if !scen.partition.is_consecutive() {
        return Err(PscpError::Invalid("the scenario file format needs consecutive blocks".into()));
    }
    let mut out = String::new();
    writeln!(out, "{} {} {}", scen.draws, scen.m(), scen.num_blocks()).unwrap();
    let sizes: Vec<String> = scen.partition.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    for b in &scen.blocks {
        for (rows, &p) in b.scenarios.iter().zip(&b.prob) {
            write!(out, "{} {}", format_real(p), rows.len()).unwrap();
            for k in rows {
                write!(out, " {}", k + 1).unwrap();
            }
            out.push('\n');
        }
    }
    for b in &scen.blocks {
        writeln!(out, "{}", format_real(b.satisfied_mass)).unwrap();
    }
    Ok(out)
}

/// Reads the scenario file format. Lines with a single token are the
/// trailing satisfied-mass lines; every other nonblank line is a scenario,
/// assigned to the block of its rows. Scenarios must appear block by block.
pub fn parse_scenarios(text: &str) -> Result<ScenarioSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty());
    let int = |line: usize, tok: &str| -> Result<usize> {
        tok.parse::<usize>()
            .map_err(|_| PscpError::parse(line, format!("expected a nonnegative integer, got {:?}", tok)))
    };
    let real = |line: usize, tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .ok()
            .filter(|p| p.is_finite())
            .ok_or_else(|| PscpError::parse(line, format!("expected a real number, got {:?}", tok)))
    };

    let (line, head) = lines.next().ok_or_else(|| PscpError::parse(1, "empty scenario file"))?;
    if head.len() != 3 {
        return Err(PscpError::parse(line, "header must be `s m T`"));
    }
    let (s, m, t_count) = (int(line, head[0])?, int(line, head[1])?, int(line, head[2])?);
    let (line, size_toks) = lines.next().ok_or_else(|| PscpError::parse(line, "missing block sizes"))?;
    if size_toks.len() != t_count {
        return Err(PscpError::parse(line, format!("expected {} block sizes", t_count)));
    }
    let sizes = size_toks.iter().map(|t| int(line, t)).collect::<Result<Vec<_>>>()?;
    if sizes.iter().sum::<usize>() != m || sizes.contains(&0) {
        return Err(PscpError::parse(line, format!("block sizes must be positive and sum to {}", m)));
    }
    let partition = BlockPartition::from_sizes(&sizes)?;

    let mut per_block: Vec<Vec<(Vec<usize>, f64)>> = vec![Vec::new(); t_count];
    let mut masses = Vec::new();
    let mut current = 0;
    let mut last = line;
    for (line, toks) in lines {
        last = line;
        if toks.len() == 1 {
            masses.push(real(line, toks[0])?);
            continue;
        }
        if !masses.is_empty() {
            return Err(PscpError::parse(line, "scenario after the satisfied-mass lines"));
        }
        let p = real(line, toks[0])?;
        let c = int(line, toks[1])?;
        if c == 0 || toks.len() != c + 2 {
            return Err(PscpError::parse(line, format!("scenario must list exactly {} rows, at least one", c)));
        }
        let mut rows = Vec::with_capacity(c);
        for tok in &toks[2..] {
            let k = int(line, tok)?;
            if k == 0 || k > m {
                return Err(PscpError::parse(line, format!("row {} outside [1, {}]", k, m)));
            }
            rows.push(k - 1);
        }
        let t = partition.block_of(rows[0]);
        if rows.iter().any(|&k| partition.block_of(k) != t) {
            return Err(PscpError::parse(line, "scenario spans two blocks"));
        }
        if t < current {
            return Err(PscpError::parse(line, "scenarios must be listed block by block"));
        }
        current = t;
        per_block[t].push((rows, p));
    }
    if masses.len() != t_count {
        return Err(PscpError::parse(last, format!("expected {} satisfied-mass lines, got {}", t_count, masses.len())));
    }
    for (d, mass) in per_block.iter_mut().zip(masses) {
        d.push((Vec::new(), mass));
    }
    normalize_scenarios(partition, s, per_block)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_real_matches_printf() {
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(2.0 / 3.0), "0.66666666666666663");
        assert_eq!(format_real(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_real(-0.5), "-0.5");
        assert_eq!(format_real(1e20), "1e+20");
        assert_eq!(format_real(123456.0), "123456");
        assert_eq!(format_real(0.0), "0");
    }

    #[test]
    fn consecutive_partition_keeps_remainder_last() {
        let p = BlockPartition::consecutive(25, 10).unwrap();
        assert_eq!(p.sizes(), vec![10, 10, 5]);
        assert_eq!(p.block_of(24), 2);
        assert_eq!(p.local_index(24), 4);
        assert!(p.is_consecutive());
    }

    #[test]
    fn partition_rejects_overlap_and_gaps() {
        assert!(BlockPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(BlockPartition::new(3, vec![vec![0, 1]]).is_err());
        assert!(BlockPartition::new(2, vec![vec![0, 1], vec![]]).is_err());
        let p = BlockPartition::new(3, vec![vec![2, 0], vec![1]]).unwrap();
        assert!(!p.is_consecutive());
        assert_eq!(p.block(0), &[0, 2]);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let p = BlockPartition::single(2).unwrap();
        let err = normalize_scenarios(p, 2, vec![vec![(vec![0], 0.5), (vec![1], 0.4)]]);
        assert!(err.is_err());
    }

    #[test]
    fn rows_outside_block_are_rejected() {
        let p = BlockPartition::from_sizes(&[1, 1]).unwrap();
        let err = normalize_uniform(p, vec![vec![vec![1]], vec![vec![1]]]);
        assert!(err.is_err());
    }
}
