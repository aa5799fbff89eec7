use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sdfields(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdfields"))
        .current_dir(dir)
        .env_remove("SDFIELDS_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "gaussian.json", r#"{"family": "gaussian", "b": 1}"#);
    write(d, "ou.json", r#"{"family": "ou"}"#);
    write(d, "exp-cpoisson.json", r#"{"family": "compound_poisson", "lambda": 1, "rate": 1}"#);
    write(d, "grid.json", r#"{"s_range": [-10, 1], "ds": 0.01, "u_points": [0, 0.5, 1]}"#);
    dir
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn cumulant_of_wiener_ou() {
    let dir = fixtures();
    let o = sdfields(dir.path(), &["cumulant", "--basis", "gaussian.json", "--kernel", "ou.json", "--u", "0", "--theta", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let c = v["cumulant"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() + 0.25).abs() < 1e-12);
    assert_eq!(c[1].as_f64().unwrap(), 0.0);
    assert_eq!(v["config"]["seed"], 271_828_182_845u64);
}

#[test]
fn sd_check_reports_dilation_witness() {
    let dir = fixtures();
    let o = sdfields(dir.path(), &["sd-check", "--basis", "exp-cpoisson.json", "--q", "5", "--intervals", "default"]);
    assert_eq!(o.status.code(), Some(2));
    let v = stdout_json(&o);
    assert_eq!(v["seed"]["verdict"], "fail");
    assert_eq!(v["seed"]["q"], 5.0);
    assert_eq!(v["seed"]["set"], serde_json::json!([0.1, 0.2]));
}

#[test]
fn gamma_seed_passes_sd_check() {
    let dir = fixtures();
    write(dir.path(), "gamma.json", r#"{"family": "gamma"}"#);
    let o = sdfields(dir.path(), &["sd-check", "--basis", "gamma.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn zero_replicas_is_a_config_error() {
    let dir = fixtures();
    let o = sdfields(
        dir.path(),
        &["simulate", "--basis", "gaussian.json", "--kernel", "ou.json", "--grid", "grid.json", "--replicas", "0", "--out", "x.csv"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ConfigParse"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn malformed_json_reports_position() {
    let dir = fixtures();
    write(dir.path(), "bad.json", "{\"family\": \"gaussian\",\n \"b\": }");
    let o = sdfields(dir.path(), &["--json", "cumulant", "--basis", "bad.json", "--kernel", "ou.json", "--u", "0", "--theta", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let v = stdout_json(&o);
    assert_eq!(v["error"]["kind"], "ConfigParse");
    assert!(v["error"]["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn missing_output_directory_fails_before_computing() {
    let dir = fixtures();
    let o = sdfields(
        dir.path(),
        &["simulate", "--basis", "gaussian.json", "--kernel", "ou.json", "--grid", "grid.json", "--out", "nope/x.csv"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulation_is_reproducible_and_replayable() {
    let dir = fixtures();
    let d = dir.path();
    let base = ["simulate", "--basis", "exp-cpoisson.json", "--kernel", "ou.json", "--grid", "grid.json", "--replicas", "20"];
    let run = |out: &str, extra: &[&str]| {
        let mut args: Vec<&str> = extra.to_vec();
        args.extend_from_slice(&base);
        args.extend_from_slice(&["--out", out]);
        let o = sdfields(d, &args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(d.join(out)).unwrap()
    };
    let a = run("a.csv", &[]);
    let b = run("b.csv", &["--threads", "1"]);
    let c = run("c.csv", &["--seed", "7"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 1 + 20 * 3);

    let o = sdfields(d, &["--rerun", "a.json", "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(d.join("r.csv")).unwrap(), a);
    assert_eq!(std::fs::read(d.join("r.json")).unwrap(), std::fs::read(d.join("a.json")).unwrap());
}

#[test]
fn env_seed_overrides_replayed_seed() {
    let dir = fixtures();
    let d = dir.path();
    let args = ["simulate", "--basis", "gaussian.json", "--kernel", "ou.json", "--grid", "grid.json", "--out", "a.csv"];
    assert_eq!(sdfields(d, &args).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_sdfields"))
        .current_dir(d)
        .env("SDFIELDS_SEED", "99")
        .args(["--rerun", "a.json", "--json", "--out", "b.csv"])
        .output()
        .unwrap();
    assert_eq!(stdout_json(&o)["config"]["seed"], 99);
}

#[test]
fn orlicz_and_fubini_reports() {
    let dir = fixtures();
    let d = dir.path();
    let o = sdfields(d, &["orlicz", "--config", "exp-cpoisson.json", "--kernel", "ou.json", "--p", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["member"], "yes");

    write(d, "mu.json", r#"{"kind": "lebesgue", "support": [0, 1]}"#);
    write(d, "sets.json", "[[0, 1]]");
    let o = sdfields(
        d,
        &["fubini", "--basis", "gaussian.json", "--kernel", "ou.json", "--mu", "mu.json", "--sets", "sets.json", "--grid", "grid.json"],
    );
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["conditions"][0]["verdict"], "holds");
    let gap = v["sides"][0][0]["gap"].as_f64().unwrap();
    assert!(gap.abs() < 0.05, "{v}");
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = fixtures();
    write(dir.path(), "typo.json", r#"{"family": "gaussian", "bb": 1}"#);
    let o = sdfields(dir.path(), &["cumulant", "--basis", "typo.json", "--kernel", "ou.json", "--u", "0", "--theta", "1"]);
    assert_eq!(o.status.code(), Some(1));
}
