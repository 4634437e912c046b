use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ris_opt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-opt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn convergence_writes_one_column_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_ris_values = 4\nd_over_lambda_values = 0.25, 0.5\nmax_iters = 3\nconv_tol = 0\n");
    let out = dir.path().join("conv.csv");
    let status = ris_opt(&["convergence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,objective_db_N4_d0.25,objective_db_N4_d0.5");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("3,"));
}

#[test]
fn distance_sweep_single_strategy_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "M = 2\nd_over_lambda_values = 0.125, 0.5\nstrategies = coupling_unaware\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let r = ris_opt(&["sweep-distance", "--preset", "paper-28ghz", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "d_over_lambda,gain_db_coupling_unaware");
    assert_eq!(text.lines().count(), 3);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn area_sweep_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_ris_values = 1, 4\nmax_iters = 5\n");
    let r = ris_opt(&["sweep-area", "--config", &cfg]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][..2], ["n_ris", "d_over_lambda"]);
    assert_eq!(rows[1][..2], ["1", "1"]);
    assert_eq!(rows[2][..2], ["4", "0.5"]);
    assert_eq!(rows[1].len(), 5);
}

#[test]
fn validate_passes_on_fresh_build() {
    let r = ris_opt(&["validate"]);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(r.status.success(), "report:\n{text}\nstderr:\n{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(text.lines().next().unwrap(), "name,measured,bound,pass");
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn bad_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    let r = ris_opt(&["validate", "--config", &cfg]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no_such_key"));

    let r = ris_opt(&["sweep-distance", "--config", "/nonexistent/file.cfg"]);
    assert_eq!(r.status.code(), Some(2));
}
