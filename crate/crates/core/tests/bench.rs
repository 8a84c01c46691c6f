use std::fs;

use pscp::bench::*;
use pscp::instance::serialize_orlib;
use pscp::sampling::random_cover;

fn write_config(dir: &std::path::Path, extra: &str) -> SuiteConfig {
    fs::write(dir.join("a.txt"), serialize_orlib(&random_cover(12, 8, 0.3, 1))).unwrap();
    fs::write(dir.join("b.txt"), serialize_orlib(&random_cover(15, 10, 0.25, 2))).unwrap();
    let text = format!(
        "# small grid\nscp a.txt\nscp b.txt\ndist circular\ndist star\nscenarios 200\nblocks 5\nblocks full\n\
         eps 0.1\neps = 0.3\nseed 7\ntime_limit 30\n{}",
        extra
    );
    SuiteConfig::parse(&text, dir).unwrap()
}

/// Everything but the timings.
fn stable(rows: &[RawRow]) -> Vec<String> {
    rows.iter()
        .map(|r| match &r.result {
            Ok(rep) => format!(
                "{} {} {} {} {} {} {} {} {:?} {:?} {:?}",
                r.instance, r.dist, r.blocks, r.s, r.eps, r.seed, r.mode, rep.status, rep.objective, rep.counters, rep.dual_bound
            ),
            Err(e) => format!("{} {} error {}", r.instance, r.mode, e),
        })
        .collect()
}

#[test]
fn suite_is_deterministic_and_aggregates_recompute_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "jobs 3\n");
    let (rows, agg) = run_suite_to_files(&cfg).unwrap();
    // 2 files x 2 dists x 2 schemes x 1 size x 1 seed x 2 eps x 2 modes
    assert_eq!(rows.len(), 32);
    assert!(rows.iter().all(|r| r.result.is_ok()));

    let serial = run_suite(&SuiteConfig { jobs: 1, ..cfg.clone() }).unwrap();
    assert_eq!(stable(&rows), stable(&serial));

    let raw = fs::read(&cfg.raw_out).unwrap();
    let back = read_raw_csv(raw.as_slice()).unwrap();
    assert_eq!(back, rows);
    let mut again = Vec::new();
    write_aggregate_csv(&aggregate(&back).unwrap(), &mut again).unwrap();
    assert_eq!(again, fs::read(&cfg.agg_out).unwrap());

    let all = &agg[0];
    assert_eq!(all.group, "all");
    assert_eq!(all.instances, 16);
    assert_eq!(all.generic.solved, 16);
    assert_eq!(all.block.solved, 16);
    assert_eq!(all.generic.gap_pct, None);
    let groups: Vec<&str> = agg.iter().map(|a| a.group.as_str()).collect();
    assert_eq!(groups, ["all", "s=200", "blocks=5", "blocks=full", "eps=0.10000000000000001", "eps=0.29999999999999999", "dist=circular", "dist=star"]);
    // single-block data gives identical optima
    let full = agg.iter().find(|a| a.group == "blocks=full").unwrap();
    assert_eq!(full.nd, 0);
    assert_eq!(full.delta_o, 0.0);
    let text = String::from_utf8(fs::read(&cfg.agg_out).unwrap()).unwrap();
    assert!(text.starts_with("group,instances,S_generic,T_generic,G%_generic,ST_generic,"));
    assert!(text.lines().nth(1).unwrap().starts_with("all,16,16,"));
}

#[test]
fn failed_solves_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eps 1.5\n");
    let rows = run_suite(&cfg).unwrap();
    assert_eq!(rows.len(), 48);
    let errors: Vec<&RawRow> = rows.iter().filter(|r| r.result.is_err()).collect();
    assert_eq!(errors.len(), 16);
    assert!(errors.iter().all(|r| r.eps == 1.5));
    let mut buf = Vec::new();
    write_raw_csv(&rows, &mut buf).unwrap();
    assert_eq!(read_raw_csv(buf.as_slice()).unwrap(), rows);
    let agg = aggregate(&rows).unwrap();
    assert_eq!(agg[0].instances, 24);
    assert_eq!(agg[0].generic.solved, 16);
}

#[test]
fn time_limited_solves_report_a_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = write_config(dir.path(), "");
    cfg.node_limit = Some(1);
    cfg.time_limit = None;
    let rows = run_suite(&cfg).unwrap();
    let agg = aggregate(&rows).unwrap();
    let unsolved = rows.iter().filter(|r| matches!(&r.result, Ok(rep) if rep.status == pscp::solver::SolveStatus::NodeLimit)).count();
    let solved = agg[0].generic.solved + agg[0].block.solved;
    assert_eq!(unsolved + solved, rows.len());
    if unsolved > 0 {
        assert!(agg[0].generic.gap_pct.is_some() || agg[0].block.gap_pct.is_some());
    }
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(SuiteConfig::parse("scp a\n", dir.path()).is_err(), "missing grids");
    assert!(SuiteConfig::parse("colour blue\n", dir.path()).is_err());
    assert!(SuiteConfig::parse("blocks 0\n", dir.path()).is_err());
    let cfg = SuiteConfig::parse(
        "scp missing.txt\ndist star\nscenarios 10\neps 0.1\nblocks full\nseed 1\n",
        dir.path(),
    )
    .unwrap();
    assert!(matches!(run_suite(&cfg), Err(pscp::PscpError::Io(_))));
}
