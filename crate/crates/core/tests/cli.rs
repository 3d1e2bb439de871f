//! End-to-end runs of the `loopinv` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use loopinv::cli::{RunReport, SOLVER_ENV};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.loop"))
}

fn loopinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopinv")).args(args).env_remove(SOLVER_ENV).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn infer_prints_a_term_and_stats() {
    let o = loopinv(&["infer", arg(&corpus("fig1"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("(= (+ (* 2 t) u) 20)"));
    assert!(lines.next().unwrap().starts_with("; solver_calls="));
}

#[test]
fn static_only_gives_up_on_learned_constraints() {
    let o = loopinv(&["infer", arg(&corpus("problem2")), "--mode", "static_only"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_rows_satisfy_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.csv");
    let o = loopinv(&["trace", arg(&corpus("fig1")), "--runs", "3", "-o", arg(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["run_id", "step", "kind", "t", "u"]);
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let (t, u): (i64, i64) = (rec[3].parse().unwrap(), rec[4].parse().unwrap());
        assert_eq!(2 * t + u, 20);
        n += 1;
    }
    assert!(n >= 11);
}

#[test]
fn check_verdicts_and_exit_codes() {
    let fig1 = corpus("fig1");
    let valid = loopinv(&["check", arg(&fig1), "--inv", "2 * t + u == 20"]);
    assert_eq!(valid.status.code(), Some(0));
    assert!(stdout(&valid).starts_with("valid"));

    let refuted = loopinv(&["check", arg(&fig1), "--inv", "t + u == 10"]);
    assert_eq!(refuted.status.code(), Some(2));
    assert!(stdout(&refuted).starts_with("refuted ind"));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("inv.txt");
    std::fs::write(&file, "2 * t + u == 20\n").unwrap();
    assert_eq!(loopinv(&["check", arg(&fig1), arg(&file)]).status.code(), Some(0));

    let missing = loopinv(&["check", arg(&fig1), "--inv", "t >= 0", "--solver", "no-such-solver"]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn solver_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_loopinv"))
        .args(["check", arg(&corpus("fig1")), "--inv", "t >= 0"])
        .env(SOLVER_ENV, "no-such-solver")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("loopinv.conf");
    std::fs::write(&cfg, "# local settings\nsolver = \"no-such-solver\"\n").unwrap();
    let fig1 = corpus("fig1");
    let from_file = loopinv(&["check", arg(&fig1), "--inv", "t >= 0", "--config", arg(&cfg)]);
    assert_eq!(from_file.status.code(), Some(4));
    let flag = loopinv(&["check", arg(&fig1), "--inv", "2 * t + u == 20", "--config", arg(&cfg), "--solver", "z3"]);
    assert_eq!(flag.status.code(), Some(0));
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.loop");
    std::fs::write(&bad, "program broken; pre: x == ;").unwrap();
    assert_eq!(loopinv(&["infer", arg(&bad)]).status.code(), Some(1));
    assert_eq!(loopinv(&["infer", "/nonexistent/file.loop"]).status.code(), Some(1));
    assert_eq!(loopinv(&["infer", arg(&corpus("fig1")), "--jobs", "0"]).status.code(), Some(1));
}

#[test]
fn bench_summary_matches_results() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    std::fs::create_dir(&corpus_dir).unwrap();
    for name in ["count_up", "fig1", "problem1"] {
        std::fs::copy(corpus(name), corpus_dir.join(format!("{name}.loop"))).unwrap();
    }
    let out = dir.path().join("out");
    let o = loopinv(&["bench", arg(&corpus_dir), "--out", arg(&out), "--seeds", "0,1", "--mode", "static_only"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = RunReport::read_rows(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    let solved: Vec<&str> = rows.iter().filter(|r| r.solved).map(|r| r.problem.as_str()).collect();
    assert_eq!(solved, ["count_up", "count_up"]);
    let summary = RunReport::read_summary(&out.join("summary.csv")).unwrap();
    assert!(summary.matches(&rows, 1e-9));
}
