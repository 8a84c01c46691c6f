//! Experiment harness: instance grids, batch solves, and the summary
//! statistics used to compare the two formulations.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;

use crate::error::{PscpError, Result};
use crate::instance::{format_real, parse_orlib, BlockPartition, CoverInstance, ScenarioSet};
use crate::sampling::{sample_scenario_set, DistKind, DistributionSpec};
use crate::solver::{solve, Counters, Mode, SolveOptions, SolveReport, SolveStatus};

/// Shift applied to every averaged column.
pub const GEOMEAN_SHIFT: f64 = 1.0;

/// `exp(mean(ln(v + shift))) - shift`.
pub fn shifted_geomean(values: &[f64], shift: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(PscpError::Invalid("shifted geometric mean of no values".into()));
    }
    if !(shift >= 0.0) || values.iter().any(|v| !(*v >= 0.0)) {
        return Err(PscpError::Invalid("shifted geometric mean needs non-negative values".into()));
    }
    let mean = values.iter().map(|v| (v + shift).ln()).sum::<f64>() / values.len() as f64;
    Ok(mean.exp() - shift)
}

/// Relative difference of two optimal values in percent,
/// `100 |o1 - o2| / max(o1, o2)`; zero when both are zero.
pub fn delta_o(o1: u64, o2: u64) -> f64 {
    let hi = o1.max(o2);
    if hi == 0 {
        return 0.0;
    }
    100.0 * o1.abs_diff(o2) as f64 / hi as f64
}

/// Optimal values of the joint-data and per-block formulations; a side is
/// `None` unless its solve was proven optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Comparison {
    pub o_generic: Option<u64>,
    pub o_block: Option<u64>,
}

impl Comparison {
    pub fn from_statuses(generic: (SolveStatus, Option<u64>), block: (SolveStatus, Option<u64>)) -> Self {
        let proven = |(st, o): (SolveStatus, Option<u64>)| if st == SolveStatus::Optimal { o } else { None };
        Comparison { o_generic: proven(generic), o_block: proven(block) }
    }

    pub fn available(&self) -> bool {
        self.o_generic.is_some() && self.o_block.is_some()
    }

    pub fn differs(&self) -> Option<bool> {
        Some(self.o_generic? != self.o_block?)
    }

    pub fn delta_o(&self) -> Option<f64> {
        Some(delta_o(self.o_generic?, self.o_block?))
    }
}

/// Solves the joint set in generic mode and the per-block set in block mode.
pub fn compare_formulations(
    inst: &CoverInstance,
    joint: &ScenarioSet,
    per_block: &ScenarioSet,
    eps: f64,
    opts: &SolveOptions,
) -> Result<Comparison> {
    let g = solve(inst, joint, eps, Mode::Generic, opts, None)?;
    let b = solve(inst, per_block, eps, Mode::Block, opts, None)?;
    Ok(Comparison::from_statuses((g.status, g.objective), (b.status, b.objective)))
}

/// Row partition used when generating a suite instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockScheme {
    /// Consecutive blocks of this many rows, the last one shorter.
    Size(usize),
    /// One block holding every row.
    Full,
}

impl BlockScheme {
    pub fn partition(&self, m: usize) -> Result<BlockPartition> {
        match *self {
            BlockScheme::Size(size) => BlockPartition::consecutive(m, size),
            BlockScheme::Full => BlockPartition::single(m),
        }
    }
}

impl fmt::Display for BlockScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockScheme::Size(n) => write!(f, "{}", n),
            BlockScheme::Full => f.write_str("full"),
        }
    }
}

impl FromStr for BlockScheme {
    type Err = PscpError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(BlockScheme::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BlockScheme::Size(n)),
            _ => Err(PscpError::Invalid(format!("block scheme must be a positive size or \"full\", got {:?}", s))),
        }
    }
}

/// Grid of a benchmark run. Every combination of
/// `scp x dist x blocks x scenarios x seed x eps` is solved in both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub scp: Vec<PathBuf>,
    pub dist: Vec<DistKind>,
    pub scenarios: Vec<usize>,
    pub eps: Vec<f64>,
    pub blocks: Vec<BlockScheme>,
    pub seeds: Vec<u64>,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    pub jobs: usize,
    pub raw_out: PathBuf,
    pub agg_out: PathBuf,
}

impl SuiteConfig {
    /// Parses `key value` (or `key = value`) lines; `#` starts a comment and
    /// grid keys may repeat. Relative paths are taken from `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = SuiteConfig {
            scp: Vec::new(),
            dist: Vec::new(),
            scenarios: Vec::new(),
            eps: Vec::new(),
            blocks: Vec::new(),
            seeds: Vec::new(),
            time_limit: None,
            node_limit: None,
            jobs: 1,
            raw_out: base.join("raw.csv"),
            agg_out: base.join("aggregate.csv"),
        };
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => match line.split_once(char::is_whitespace) {
                    Some((k, v)) => (k.trim(), v.trim()),
                    None => return Err(PscpError::parse(lineno, format!("missing value for {:?}", line))),
                },
            };
            let bad = |e: &dyn fmt::Display| PscpError::parse(lineno, format!("{}: {}", key, e));
            match key {
                "scp" => cfg.scp.push(base.join(value)),
                "dist" => cfg.dist.push(value.parse().map_err(|e: PscpError| bad(&e))?),
                "scenarios" => cfg.scenarios.push(value.parse().map_err(|e| bad(&e))?),
                "eps" => cfg.eps.push(value.parse().map_err(|e| bad(&e))?),
                "blocks" => cfg.blocks.push(value.parse().map_err(|e: PscpError| bad(&e))?),
                "seed" => cfg.seeds.push(value.parse().map_err(|e| bad(&e))?),
                "time_limit" => {
                    let secs: f64 = value.parse().map_err(|e| bad(&e))?;
                    cfg.time_limit = Some(Duration::try_from_secs_f64(secs).map_err(|e| bad(&e))?);
                }
                "node_limit" => cfg.node_limit = Some(value.parse().map_err(|e| bad(&e))?),
                "jobs" => cfg.jobs = value.parse().map_err(|e| bad(&e))?,
                "raw_out" => cfg.raw_out = base.join(value),
                "agg_out" => cfg.agg_out = base.join(value),
                _ => return Err(PscpError::parse(lineno, format!("unknown key {:?}", key))),
            }
        }
        for (name, empty) in [
            ("scp", cfg.scp.is_empty()),
            ("dist", cfg.dist.is_empty()),
            ("scenarios", cfg.scenarios.is_empty()),
            ("eps", cfg.eps.is_empty()),
            ("blocks", cfg.blocks.is_empty()),
            ("seed", cfg.seeds.is_empty()),
        ] {
            if empty {
                return Err(PscpError::Invalid(format!("config has no {:?} entry", name)));
            }
        }
        if cfg.jobs == 0 {
            return Err(PscpError::Invalid("jobs must be at least 1".into()));
        }
        Ok(cfg)
    }
}

/// One solve of the suite. `result` holds the report, or the error message
/// when the solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub instance: String,
    pub dist: DistKind,
    pub blocks: BlockScheme,
    pub s: usize,
    pub eps: f64,
    pub seed: u64,
    pub mode: Mode,
    pub result: std::result::Result<SolveReport, String>,
}

impl RawRow {
    fn solved(&self) -> bool {
        matches!(&self.result, Ok(r) if matches!(r.status, SolveStatus::Optimal | SolveStatus::Infeasible))
    }

    fn unsolved_gap(&self) -> Option<f64> {
        match &self.result {
            // no incumbent counts as a full gap
            Ok(r) if matches!(r.status, SolveStatus::TimeLimit | SolveStatus::NodeLimit) => Some(100.0 * r.gap.min(1.0)),
            _ => None,
        }
    }

    fn pair_key(&self) -> (String, DistKind, BlockScheme, usize, u64, u64) {
        (self.instance.clone(), self.dist, self.blocks, self.s, self.eps.to_bits(), self.seed)
    }
}

pub const RAW_HEADER: [&str; 22] = [
    "instance",
    "dist",
    "blocks",
    "s",
    "eps",
    "seed",
    "mode",
    "T",
    "status",
    "objective",
    "dual_bound",
    "gap",
    "nodes",
    "lp_solves",
    "cuts_generic",
    "cuts_block",
    "cuts_coverage",
    "root_iters",
    "t_total_s",
    "t_root_s",
    "t_sep_s",
    "error",
];

pub fn write_raw_csv<W: Write>(rows: &[RawRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RAW_HEADER)?;
    for row in rows {
        let mut rec = vec![
            row.instance.clone(),
            row.dist.to_string(),
            row.blocks.to_string(),
            row.s.to_string(),
            format_real(row.eps),
            row.seed.to_string(),
            row.mode.to_string(),
        ];
        match &row.result {
            Ok(r) => {
                let c = &r.counters;
                rec.extend([
                    r.blocks.to_string(),
                    r.status.to_string(),
                    r.objective.map_or(String::new(), |o| o.to_string()),
                    format_real(r.dual_bound),
                    format_real(r.gap),
                    c.nodes.to_string(),
                    c.lp_solves.to_string(),
                    c.cuts_generic.to_string(),
                    c.cuts_block.to_string(),
                    c.cuts_coverage.to_string(),
                    c.root_iters.to_string(),
                    format_real(r.t_total),
                    format_real(r.t_root),
                    format_real(r.t_sep),
                    String::new(),
                ]);
            }
            Err(msg) => {
                rec.push(String::new());
                rec.push("error".into());
                rec.extend(std::iter::repeat_n(String::new(), 12));
                rec.push(msg.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_csv<R: Read>(input: R) -> Result<Vec<RawRow>> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(RAW_HEADER) {
        return Err(PscpError::parse(1, "unexpected raw CSV header"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("");
        fn num<T: FromStr>(s: &str, line: usize, name: &str) -> Result<T> {
            s.parse().map_err(|_| PscpError::parse(line, format!("bad {} {:?}", name, s)))
        }
        let key = |e: PscpError| PscpError::parse(line, e.to_string());
        let mode: Mode = field(6).parse().map_err(key)?;
        let eps: f64 = num(field(4), line, "eps")?;
        let seed: u64 = num(field(5), line, "seed")?;
        let s: usize = num(field(3), line, "s")?;
        let result = if field(8) == "error" {
            Err(field(21).to_string())
        } else {
            Ok(SolveReport {
                status: field(8).parse().map_err(key)?,
                objective: if field(9).is_empty() { None } else { Some(num(field(9), line, "objective")?) },
                dual_bound: num(field(10), line, "dual_bound")?,
                gap: num(field(11), line, "gap")?,
                counters: Counters {
                    nodes: num(field(12), line, "nodes")?,
                    lp_solves: num(field(13), line, "lp_solves")?,
                    cuts_generic: num(field(14), line, "cuts_generic")?,
                    cuts_block: num(field(15), line, "cuts_block")?,
                    cuts_coverage: num(field(16), line, "cuts_coverage")?,
                    root_iters: num(field(17), line, "root_iters")?,
                },
                t_total: num(field(18), line, "t_total_s")?,
                t_root: num(field(19), line, "t_root_s")?,
                t_sep: num(field(20), line, "t_sep_s")?,
                seed: Some(seed),
                mode,
                eps,
                s,
                blocks: num(field(7), line, "T")?,
            })
        };
        rows.push(RawRow {
            instance: field(0).to_string(),
            dist: field(1).parse().map_err(key)?,
            blocks: field(2).parse().map_err(key)?,
            s,
            eps,
            seed,
            mode,
            result,
        });
    }
    Ok(rows)
}

/// Summary of one formulation over a group of solves.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    /// Solves that finished with a proven status.
    pub solved: usize,
    /// Shifted geometric mean of the total time over all non-failed solves.
    pub time: Option<f64>,
    /// Shifted geometric mean of the end gap in percent, unsolved solves only.
    pub gap_pct: Option<f64>,
    /// Shifted geometric mean of the separation time.
    pub sep_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    /// `all`, or `key=value` for one grid value.
    pub group: String,
    /// Number of instances (generic/block pairs) in the group.
    pub instances: usize,
    pub generic: ModeSummary,
    pub block: ModeSummary,
    /// Instances whose two proven optima differ.
    pub nd: usize,
    /// Shifted geometric mean of the optimal value difference in percent
    /// over the `nd` differing instances; zero when none differ.
    pub delta_o: f64,
}

fn summarize(rows: &[&RawRow], mode: Mode) -> Result<ModeSummary> {
    let mine: Vec<&RawRow> = rows.iter().copied().filter(|r| r.mode == mode).collect();
    let ok: Vec<&SolveReport> = mine.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let sgm = |v: Vec<f64>| if v.is_empty() { Ok(None) } else { shifted_geomean(&v, GEOMEAN_SHIFT).map(Some) };
    Ok(ModeSummary {
        solved: mine.iter().filter(|r| r.solved()).count(),
        time: sgm(ok.iter().map(|r| r.t_total).collect())?,
        gap_pct: sgm(mine.iter().filter_map(|r| r.unsolved_gap()).collect())?,
        sep_time: sgm(ok.iter().map(|r| r.t_sep).collect())?,
    })
}

fn aggregate_group(group: String, rows: &[&RawRow]) -> Result<AggregateRow> {
    let mut pairs: Vec<(_, [Option<&RawRow>; 2])> = Vec::new();
    let mut slot: HashMap<_, usize> = HashMap::new();
    for r in rows {
        let key = r.pair_key();
        let i = *slot.entry(key.clone()).or_insert_with(|| {
            pairs.push((key, [None, None]));
            pairs.len() - 1
        });
        pairs[i].1[(r.mode == Mode::Block) as usize] = Some(r);
    }
    let outcome = |r: Option<&RawRow>| match r.map(|r| &r.result) {
        Some(Ok(rep)) => (rep.status, rep.objective),
        _ => (SolveStatus::Infeasible, None),
    };
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(_, [g, b])| Comparison::from_statuses(outcome(*g), outcome(*b)))
        .filter(|c| c.differs() == Some(true))
        .filter_map(|c| c.delta_o())
        .collect();
    Ok(AggregateRow {
        group,
        instances: pairs.len(),
        generic: summarize(rows, Mode::Generic)?,
        block: summarize(rows, Mode::Block)?,
        nd: diffs.len(),
        delta_o: if diffs.is_empty() { 0.0 } else { shifted_geomean(&diffs, GEOMEAN_SHIFT)? },
    })
}

/// Aggregates over all rows, then per scenario count, block scheme, epsilon
/// and distribution, with group values in order of first appearance.
pub fn aggregate(rows: &[RawRow]) -> Result<Vec<AggregateRow>> {
    let all: Vec<&RawRow> = rows.iter().collect();
    let mut out = vec![aggregate_group("all".into(), &all)?];
    let labels: [(&str, fn(&RawRow) -> String); 4] = [
        ("s", |r| r.s.to_string()),
        ("blocks", |r| r.blocks.to_string()),
        ("eps", |r| format_real(r.eps)),
        ("dist", |r| r.dist.to_string()),
    ];
    for (name, label) in labels {
        let mut values: Vec<String> = Vec::new();
        for r in rows {
            let v = label(r);
            if !values.contains(&v) {
                values.push(v);
            }
        }
        for v in values {
            let members: Vec<&RawRow> = rows.iter().filter(|r| label(r) == v).collect();
            out.push(aggregate_group(format!("{}={}", name, v), &members)?);
        }
    }
    Ok(out)
}

pub const AGGREGATE_HEADER: [&str; 12] = [
    "group",
    "instances",
    "S_generic",
    "T_generic",
    "G%_generic",
    "ST_generic",
    "S_block",
    "T_block",
    "G%_block",
    "ST_block",
    "ND",
    "dO%",
];

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let opt = |x: Option<f64>| x.map_or(String::new(), format_real);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for a in rows {
        let mut rec = vec![a.group.clone(), a.instances.to_string()];
        for m in [&a.generic, &a.block] {
            rec.extend([m.solved.to_string(), opt(m.time), opt(m.gap_pct), opt(m.sep_time)]);
        }
        rec.extend([a.nd.to_string(), format_real(a.delta_o)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

struct Dataset {
    instance: String,
    inst: std::sync::Arc<CoverInstance>,
    dist: DistKind,
    blocks: BlockScheme,
    s: usize,
    seed: u64,
    data: std::result::Result<(ScenarioSet, ScenarioSet), String>,
}

/// Runs every grid point in both modes on a pool of `cfg.jobs` threads.
/// Rows come back in grid order whatever the scheduling; a failed solve
/// becomes an `error` row and the suite carries on.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<RawRow>> {
    let mut instances = Vec::new();
    for path in &cfg.scp {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PscpError::Io(std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e))))?;
        let inst = parse_orlib(&text).map_err(|e| PscpError::Invalid(format!("{}: {}", path.display(), e)))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned());
        instances.push((name, std::sync::Arc::new(inst)));
    }
    let mut grid = Vec::new();
    for (name, inst) in &instances {
        for &dist in &cfg.dist {
            for &blocks in &cfg.blocks {
                for &s in &cfg.scenarios {
                    for &seed in &cfg.seeds {
                        grid.push((name.clone(), inst.clone(), dist, blocks, s, seed));
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| PscpError::Invalid(format!("thread pool: {}", e)))?;
    let opts = SolveOptions { time_limit: cfg.time_limit, node_limit: cfg.node_limit, ..SolveOptions::default() };
    let rows = pool.install(|| {
        let datasets: Vec<Dataset> = grid
            .into_par_iter()
            .map(|(instance, inst, dist, blocks, s, seed)| {
                let data = (|| {
                    let partition = blocks.partition(inst.m)?;
                    let spec = DistributionSpec::draw(dist, &partition, seed);
                    let sampled = sample_scenario_set(&partition, &spec, s, true)?;
                    let joint = sampled.joint.expect("joint set requested");
                    Ok::<_, PscpError>((joint, sampled.per_block))
                })()
                .map_err(|e| e.to_string());
                Dataset { instance, inst, dist, blocks, s, seed, data }
            })
            .collect();
        let mut jobs = Vec::new();
        for d in &datasets {
            for &eps in &cfg.eps {
                for mode in [Mode::Generic, Mode::Block] {
                    jobs.push((d, eps, mode));
                }
            }
        }
        jobs.into_par_iter()
            .map(|(d, eps, mode)| {
                let result = match &d.data {
                    Err(e) => Err(e.clone()),
                    Ok((joint, per_block)) => {
                        let scen = if mode == Mode::Generic { joint } else { per_block };
                        solve(&d.inst, scen, eps, mode, &opts, None)
                            .map(|res| SolveReport::new(&res, scen, mode, eps, Some(d.seed)))
                            .map_err(|e| e.to_string())
                    }
                };
                RawRow { instance: d.instance.clone(), dist: d.dist, blocks: d.blocks, s: d.s, eps, seed: d.seed, mode, result }
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

/// Runs the suite and writes both CSV files.
pub fn run_suite_to_files(cfg: &SuiteConfig) -> Result<(Vec<RawRow>, Vec<AggregateRow>)> {
    let rows = run_suite(cfg)?;
    let agg = aggregate(&rows)?;
    write_raw_csv(&rows, std::fs::File::create(&cfg.raw_out)?)?;
    write_aggregate_csv(&agg, std::fs::File::create(&cfg.agg_out)?)?;
    Ok((rows, agg))
}
