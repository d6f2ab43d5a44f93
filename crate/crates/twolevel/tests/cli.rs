use std::path::Path;
use std::process::{Command, Output};
use twolevel::measures::{wasserstein1, BetaSpec, LimitMeasure};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twolevel"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .env("TWOLEVEL_OUT_DIR", dir)
        .output()
        .expect("spawn twolevel")
}

#[test]
fn solve_beta_fixed_point_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["solve", "--initial", "beta:3,1", "--lambda", "3", "--times", "0,1,10"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("solve.json")).unwrap();
    let snapshots: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(snapshots.len(), 3);
    let reference = BetaSpec::new(3.0, 1.0).unwrap();
    for snap in &snapshots {
        let mu: LimitMeasure = serde_json::from_value(snap["measure"].clone()).unwrap();
        let d = wasserstein1(&mu, &reference);
        assert!(d < 1e-7, "t = {}: W1 = {d}", snap["t"]);
    }
}

#[test]
fn classify_example3_small_lambda_hits_zero() {
    let out = run(&["classify", "--initial", "example3", "--lambda", "1.5"], Path::new("."));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["verdict"], "delta0", "{v}");
}

#[test]
fn simulate_is_deterministic() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--m", "10", "--n", "10", "--s", "0.1", "--r", "1", "--w", "1", "--T", "1",
        "--seed", "42",
    ];
    let o1 = run(&args, d1.path());
    let o2 = run(&args, d2.path());
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    assert!(o2.status.success());
    let c1 = std::fs::read(d1.path().join("path.csv")).unwrap();
    let c2 = std::fs::read(d2.path().join("path.csv")).unwrap();
    assert!(!c1.is_empty());
    assert_eq!(c1, c2);
}

#[test]
fn oracle_prints_reference_snapshot() {
    let out = run(
        &["oracle", "--example", "1", "--lambda", "2", "--t", "0.6931471805599453", "--x0", "0.5"],
        Path::new("."),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = v["mean"].as_f64().unwrap();
    assert!((mean - 1.0 / 3.0).abs() < 1e-12, "mean = {mean}");
}

#[test]
fn validation_errors_exit_1() {
    let out = run(&["solve", "--initial", "beta:3,1", "--lambda", "-2", "--times", "1"], Path::new("."));
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["classify", "--initial", "nonsense", "--lambda", "3"], Path::new("."));
    assert_eq!(out.status.code(), Some(1));

    let out = bin().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // alpha >= lambda is invalid for example 5
    let out = run(
        &["oracle", "--example", "5", "--lambda", "2", "--t", "1", "--alpha", "3", "--a", "0.5"],
        Path::new("."),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn study_runs_and_reports_verdict_in_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_ok = r#"
        kind = "steady_state"
        initial = "example2"
        lambda = 3.0
        horizon = 20.0
        seed = 5
    "#;
    let ok_path = dir.path().join("ok.toml");
    std::fs::write(&ok_path, cfg_ok).unwrap();
    let out = run(&["study", "--config", ok_path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("steadystate.csv").exists());
    assert!(dir.path().join("steadystate.json").exists());

    // an unreachable threshold flips the verdict, exit code 3
    let cfg_fail = format!("{cfg_ok}\nthreshold = 1e-12");
    let fail_path = dir.path().join("fail.toml");
    std::fs::write(&fail_path, cfg_fail).unwrap();
    let out = run(&["study", "--config", fail_path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_override_logs_notice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
        kind = "steady_state"
        initial = "example2"
        lambda = 3.0
        horizon = 20.0
        seed = 5
    "#;
    let path = dir.path().join("s.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = run(
        &["study", "--config", path.to_str().unwrap(), "--seed", "99"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("overrides config seed"), "{err}");
}
