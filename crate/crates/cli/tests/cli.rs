use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pscp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pscp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A = I_2, c = (1, 2); xi = (1,0) w.p. 0.6 and (0,1) w.p. 0.4.
fn two_column_files(dir: &Path) -> (String, String) {
    let scp = dir.join("o1.txt");
    let scen = dir.join("o1.scen");
    fs::write(&scp, "2 2\n1 2\n1 1\n1 2\n").unwrap();
    fs::write(&scen, "2 2 1\n2\n0.59999999999999998 1 1\n0.40000000000000002 1 2\n0\n").unwrap();
    (scp.to_str().unwrap().to_string(), scen.to_str().unwrap().to_string())
}

#[test]
fn verify_full_cover() {
    let dir = tempfile::tempdir().unwrap();
    let (scp, scen) = two_column_files(dir.path());
    let o = pscp(&["verify", "--scp", &scp, "--scen", &scen, "--eps", "0.3", "--mode", "generic", "--x", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("probability=1\n"), "{}", out);
    assert!(out.contains("feasible=true\n"));
    assert!(out.contains("cost=3\n"));
    let o = pscp(&["verify", "--scp", &scp, "--scen", &scen, "--eps", "0.3", "--mode", "generic", "--x", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("probability=0.59999999999999998\n"));
    let o = pscp(&["verify", "--scp", &scp, "--scen", &scen, "--eps", "0.3", "--mode", "generic", "--x", "1"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn solve_and_oracle_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (scp, scen) = two_column_files(dir.path());
    let report = dir.path().join("report.txt");
    let log = dir.path().join("cuts.log");
    for mode in ["generic", "block"] {
        let o = pscp(&[
            "solve", "--scp", &scp, "--scen", &scen, "--eps", "0.3", "--mode", mode,
            "--report", report.to_str().unwrap(), "--cut-log", log.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        assert!(out.starts_with("status=optimal\nobjective=3\n"), "{}", out);
        assert!(out.contains("x=11\n"));
        assert!(out.contains("seed=none\n"));
        let saved = fs::read_to_string(&report).unwrap();
        assert!(out.starts_with(&saved));
        let keys: Vec<&str> = saved.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "status", "objective", "dual_bound", "gap", "nodes", "lp_solves", "cuts_generic", "cuts_block",
                "cuts_coverage", "root_iters", "t_total_s", "t_root_s", "t_sep_s", "seed", "mode", "eps", "s", "T"
            ]
        );
    }
    let o = pscp(&["oracle", "--scp", &scp, "--scen", &scen, "--eps", "0.4", "--mode", "block"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "status=optimal\nobjective=1\nx=10\n");
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (scp, scen) = two_column_files(dir.path());
    let o = pscp(&["solve", "--scp", &scp, "--scen", &scen, "--eps", "1.5", "--mode", "generic"]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(pscp(&["solve", "--bogus"]).status.code(), Some(64));
    assert_eq!(pscp(&["frobnicate"]).status.code(), Some(64));
    let o = pscp(&["solve", "--scp", &scp, "--scen", &scen, "--eps", "0.3", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(64));
    let broken = dir.path().join("broken.txt");
    fs::write(&broken, "2 2 1 x").unwrap();
    let o = pscp(&["solve", "--scp", broken.to_str().unwrap(), "--scen", &scen, "--eps", "0.3", "--mode", "block"]);
    assert_eq!(o.status.code(), Some(65));
    let o = pscp(&["solve", "--scp", "/nonexistent/file", "--scen", &scen, "--eps", "0.3", "--mode", "block"]);
    assert_eq!(o.status.code(), Some(65));
    assert_eq!(pscp(&["--help"]).status.code(), Some(0));
}

#[test]
fn generated_files_feed_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let scp = dir.path().join("a.txt");
    // 6 rows, 4 columns: each column covers a pair of rows, plus a column covering all
    fs::write(&scp, "6 4\n3 3 3 10\n2 1 4\n2 1 4\n2 2 4\n2 2 4\n2 3 4\n2 3 4\n").unwrap();
    let scp = scp.to_str().unwrap();
    let out = dir.path().join("a.scen");
    let joint = dir.path().join("a.joint");
    let gen = |seed: &str| {
        pscp(&[
            "gen", "--scp", scp, "--dist", "star", "--blocks", "4", "--scenarios", "500", "--seed", seed,
            "--out", out.to_str().unwrap(), "--joint", joint.to_str().unwrap(),
        ])
    };
    assert_eq!(gen("9").status.code(), Some(0));
    let first = fs::read(&out).unwrap();
    assert_eq!(gen("9").status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), first);
    let sidecar = fs::read_to_string(dir.path().join("a.scen.dist")).unwrap();
    assert!(sidecar.contains("seed 9\n"));

    let o = pscp(&["solve", "--scp", scp, "--scen", out.to_str().unwrap(), "--eps", "0.1", "--mode", "generic"]);
    assert_eq!(o.status.code(), Some(64), "two blocks in generic mode");
    for (file, mode) in [(&out, "block"), (&joint, "generic"), (&joint, "block")] {
        let o = pscp(&["solve", "--scp", scp, "--scen", file.to_str().unwrap(), "--eps", "0.1", "--mode", mode]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.contains("seed=9\n"));
        let obj: u64 = text.lines().find_map(|l| l.strip_prefix("objective=")).unwrap().parse().unwrap();
        let or = pscp(&["oracle", "--scp", scp, "--scen", file.to_str().unwrap(), "--eps", "0.1", "--mode", mode]);
        assert!(stdout(&or).contains(&format!("objective={}\n", obj)));
    }
}

#[test]
fn bench_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (scp, _) = two_column_files(dir.path());
    let cfg = dir.path().join("suite.cfg");
    fs::write(
        &cfg,
        format!("scp {}\ndist circular\nscenarios 50\neps 0.1\nblocks full\nseed 1\nraw_out raw.csv\nagg_out agg.csv\n", scp),
    )
    .unwrap();
    let o = pscp(&["bench", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("solves=2 errors=0"));
    assert_eq!(fs::read_to_string(dir.path().join("raw.csv")).unwrap().lines().count(), 3);
    assert!(fs::read_to_string(dir.path().join("agg.csv")).unwrap().contains("\nall,1,"));
}
