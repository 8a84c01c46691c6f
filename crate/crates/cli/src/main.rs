use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use pscp::bench::{run_suite_to_files, BlockScheme, SuiteConfig};
use pscp::instance::{format_real, parse_orlib, parse_scenarios, write_scenarios, CoverInstance, ScenarioSet};
use pscp::oracle::enumerate_optimal;
use pscp::sampling::{sample_scenario_set, DistKind, DistributionSpec};
use pscp::solver::{check_eps, check_feasible, solve, Mode, SolveOptions, SolveReport, SolveStatus};
use pscp::PscpError;

const EXIT_LIMIT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;
const EXIT_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "pscp", version, about = "Probabilistic set covering by Benders decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a scenario file for a covering instance
    Gen {
        /// OR-Library set covering file
        #[arg(long)]
        scp: PathBuf,
        #[arg(long)]
        dist: DistKind,
        /// Block size, or "full" for a single block
        #[arg(long)]
        blocks: BlockScheme,
        /// Number of draws
        #[arg(long)]
        scenarios: usize,
        #[arg(long)]
        seed: u64,
        /// Per-block scenario file; the parameters go to `<out>.dist`
        #[arg(long)]
        out: PathBuf,
        /// Also write the joint single-block file built from the same draws
        #[arg(long)]
        joint: Option<PathBuf>,
    },
    /// Solve to optimality and print the report
    Solve {
        #[arg(long)]
        scp: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        mode: Mode,
        /// Wall-clock limit in seconds
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        node_limit: Option<usize>,
        /// Do not fix rows forced by the probability threshold
        #[arg(long)]
        no_presolve: bool,
        /// Write one line per generated cut
        #[arg(long)]
        cut_log: Option<PathBuf>,
        /// Also write the report to this file
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a 0-1 column vector against the chance constraint
    Verify {
        #[arg(long)]
        scp: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        mode: Mode,
        /// One character per column, x_1 first
        #[arg(long)]
        x: String,
    },
    /// Solve a small instance by enumerating every column vector
    Oracle {
        #[arg(long)]
        scp: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        mode: Mode,
    },
    /// Run a benchmark grid
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads, overriding the config
        #[arg(long)]
        jobs: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Input(String),
    Internal(String),
}

impl From<PscpError> for Failure {
    fn from(e: PscpError) -> Self {
        match e {
            PscpError::Epsilon(_) | PscpError::GenericNeedsOneBlock(_) | PscpError::Guard { .. } => {
                Failure::Usage(e.to_string())
            }
            PscpError::Parse { .. } | PscpError::Invalid(_) | PscpError::Io(_) | PscpError::Csv(_) => {
                Failure::Input(e.to_string())
            }
            PscpError::Lp(_) => Failure::Internal(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e)))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e)))
}

fn in_file(path: &Path, e: PscpError) -> Failure {
    match Failure::from(e) {
        Failure::Input(msg) => Failure::Input(format!("{}: {}", path.display(), msg)),
        other => other,
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".dist");
    PathBuf::from(s)
}

/// The seed recorded next to a generated scenario file, if any.
fn recorded_seed(scen: &Path) -> Option<u64> {
    let text = fs::read_to_string(sidecar(scen)).ok()?;
    text.lines().find_map(|l| l.strip_prefix("seed ")?.trim().parse().ok())
}

fn load(scp: &Path, scen: &Path, eps: f64, mode: Mode) -> Result<(CoverInstance, ScenarioSet), Failure> {
    check_eps(eps)?;
    let inst = parse_orlib(&read(scp)?).map_err(|e| in_file(scp, e))?;
    let set = parse_scenarios(&read(scen)?).map_err(|e| in_file(scen, e))?;
    if inst.m != set.m() {
        return Err(Failure::Input(format!("covering data has {} rows, scenarios have {}", inst.m, set.m())));
    }
    if mode == Mode::Generic && set.num_blocks() != 1 {
        return Err(PscpError::GenericNeedsOneBlock(set.num_blocks()).into());
    }
    Ok((inst, set))
}

fn bits(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Gen { scp, dist, blocks, scenarios, seed, out, joint } => {
            let inst = parse_orlib(&read(&scp)?).map_err(|e| in_file(&scp, e))?;
            if scenarios == 0 {
                return Err(Failure::Usage("--scenarios must be positive".into()));
            }
            let partition = blocks.partition(inst.m)?;
            let spec = DistributionSpec::draw(dist, &partition, seed);
            let sampled = sample_scenario_set(&partition, &spec, scenarios, joint.is_some())?;
            write(&out, &write_scenarios(&sampled.per_block)?)?;
            write(&sidecar(&out), &spec.to_text())?;
            if let (Some(path), Some(set)) = (&joint, &sampled.joint) {
                write(path, &write_scenarios(set)?)?;
                write(&sidecar(path), &spec.to_text())?;
            }
            println!(
                "blocks={} support={} satisfied_mass={}",
                sampled.per_block.num_blocks(),
                sampled.per_block.support_size(),
                sampled.per_block.blocks.iter().map(|b| format_real(b.satisfied_mass)).collect::<Vec<_>>().join(",")
            );
            Ok(0)
        }
        Command::Solve { scp, scen, eps, mode, time_limit, node_limit, no_presolve, cut_log, report } => {
            let (inst, set) = load(&scp, &scen, eps, mode)?;
            let time_limit = match time_limit {
                Some(t) => Some(
                    Duration::try_from_secs_f64(t).map_err(|e| Failure::Usage(format!("--time-limit: {}", e)))?,
                ),
                None => None,
            };
            let opts = SolveOptions { time_limit, node_limit, presolve: !no_presolve, ..SolveOptions::default() };
            let mut log = match &cut_log {
                Some(path) => Some(BufWriter::new(
                    fs::File::create(path).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e)))?,
                )),
                None => None,
            };
            let result = solve(&inst, &set, eps, mode, &opts, log.as_mut().map(|w| w as &mut dyn Write))?;
            if let Some(mut w) = log {
                w.flush().map_err(|e| Failure::Input(format!("cut log: {}", e)))?;
            }
            let text = SolveReport::new(&result, &set, mode, eps, recorded_seed(&scen)).to_text();
            print!("{}", text);
            if let Some(x) = &result.x {
                println!("x={}", bits(x));
            }
            if let Some(path) = &report {
                write(path, &text)?;
            }
            Ok(match result.status {
                SolveStatus::Optimal => 0,
                SolveStatus::TimeLimit | SolveStatus::NodeLimit => EXIT_LIMIT,
                SolveStatus::Infeasible => EXIT_INFEASIBLE,
            })
        }
        Command::Verify { scp, scen, eps, mode, x } => {
            let (inst, set) = load(&scp, &scen, eps, mode)?;
            if x.len() != inst.n || !x.chars().all(|c| c == '0' || c == '1') {
                return Err(Failure::Usage(format!("--x needs {} characters 0 or 1", inst.n)));
            }
            let x: Vec<bool> = x.chars().map(|c| c == '1').collect();
            let f = check_feasible(&x, &inst, &set, eps);
            println!("probability={}", format_real(f.probability));
            println!("feasible={}", f.feasible);
            println!("cost={}", inst.cost_of(&x));
            Ok(if f.feasible { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Oracle { scp, scen, eps, mode } => {
            let (inst, set) = load(&scp, &scen, eps, mode)?;
            match enumerate_optimal(&inst, &set, eps)? {
                Some((cost, x)) => {
                    println!("status=optimal");
                    println!("objective={}", cost);
                    println!("x={}", bits(&x));
                    Ok(0)
                }
                None => {
                    println!("status=infeasible");
                    Ok(EXIT_INFEASIBLE)
                }
            }
        }
        Command::Bench { config, jobs } => {
            let base = config.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            let mut cfg = SuiteConfig::parse(&read(&config)?, &base).map_err(|e| in_file(&config, e))?;
            if let Some(j) = jobs {
                if j == 0 {
                    return Err(Failure::Usage("--jobs must be at least 1".into()));
                }
                cfg.jobs = j;
            }
            let (rows, agg) = run_suite_to_files(&cfg)?;
            let errors = rows.iter().filter(|r| r.result.is_err()).count();
            println!("solves={} errors={}", rows.len(), errors);
            println!("raw={}", cfg.raw_out.display());
            println!("aggregate={}", cfg.agg_out.display());
            if let Some(all) = agg.first() {
                println!("solved_generic={} solved_block={} nd={}", all.generic.solved, all.block.solved, all.nd);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(EXIT_SOFTWARE)
        }
    }
}
