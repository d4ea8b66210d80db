use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_halfspace"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.json");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.env_remove("HALFSPACE_THREADS");
    cmd.output().unwrap()
}

fn report(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join("out").join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("diagnostic on stderr");
    serde_json::from_str(line).unwrap()
}

const CONSTANT_SOLVE: &str = r#"{
    "n": 2, "a": 0.5,
    "grid": {"half_width": 1.0, "tangential_nodes": 33},
    "boundary": {"kind": "dirichlet",
                 "bottom": {"kind": "constant", "value": 1.0},
                 "lateral_top": {"kind": "constant", "value": 1.0}}
}"#;

#[test]
fn solve_constant_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve"], Some(CONSTANT_SOLVE));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "solve.json");
    assert!(r["result"]["fit"]["c_star"].as_f64().unwrap().abs() < 1e-12);
    assert!((r["result"]["fit"]["c2"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let meta = &r["meta"];
    for key in ["a", "n", "grid", "normalization_convention", "code_version"] {
        assert!(!meta[key].is_null(), "missing {key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/solve.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "x1,x2,u");
    let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn verify_invariance_default_battery() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify-invariance"], None);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().filter(|l| l.contains("rate")).count() >= 21);
    let r = report(dir.path(), "verify_invariance.json");
    for case in r["result"]["cases"].as_array().unwrap() {
        assert!(case["rate"].as_f64().unwrap() >= 1.8);
    }
}

#[test]
fn negative_tolerance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CONSTANT_SOLVE.replacen("\"n\": 2,", "\"n\": 2, \"solver\": {\"tolerance\": -1.0},", 1);
    let out = run(dir.path(), &["solve"], Some(&cfg));
    assert_eq!(out.status.code(), Some(1));
    let d = stderr_json(&out);
    assert_eq!(d["level"], "error");
    assert!(d["message"].as_str().unwrap().contains("tolerance"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CONSTANT_SOLVE.replacen("\"n\": 2,", "\"n\": 2, \"colour\": 3,", 1);
    let out = run(dir.path(), &["solve"], Some(&cfg));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "config");
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "n": 2, "a": 0.0,
        "grid": {"half_width": 1.0, "tangential_nodes": 33},
        "boundary": {"kind": "dirichlet",
                     "bottom": {"kind": "random_fourier", "amplitude": 1.0, "modes": 4},
                     "lateral_top": {"kind": "constant", "value": 0.0}},
        "solver": {"max_iterations": 2, "initial_guess": "zero"}
    }"#;
    let out = run(dir.path(), &["solve"], Some(cfg));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "numerical");
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let cfg = r#"{
        "n": 2, "a": -0.5,
        "grid": {"half_width": 1.0, "tangential_nodes": 33},
        "boundary": {"kind": "dirichlet",
                     "bottom": {"kind": "random_fourier", "amplitude": 1.0, "modes": 3},
                     "lateral_top": {"kind": "constant", "value": 0.5}}
    }"#;
    let read = |seed: &str, threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, cfg).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_halfspace"))
            .args(["solve", "--seed", seed, "--threads", threads, "--config"])
            .arg(&path)
            .arg("--out")
            .arg(dir.path().join("out"))
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        (
            std::fs::read(dir.path().join("out/solve.csv")).unwrap(),
            std::fs::read(dir.path().join("out/solve.json")).unwrap(),
        )
    };
    let first = read("7", "1");
    assert_eq!(first, read("7", "3"));
    assert_ne!(first.0, read("8", "1").0);
}

#[test]
fn moving_sphere_is_reproducible_and_certified() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["moving-sphere", "--seed", "3"];
    assert_eq!(run(a.path(), &args, None).status.code(), Some(0));
    assert_eq!(run(b.path(), &args, None).status.code(), Some(0));
    let ra = std::fs::read(a.path().join("out/moving_sphere.json")).unwrap();
    let rb = std::fs::read(b.path().join("out/moving_sphere.json")).unwrap();
    assert_eq!(ra, rb);
    let r = report(a.path(), "moving_sphere.json");
    assert!(r["result"]["scan"]["global_min"].as_f64().unwrap() >= -1e-12);
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_halfspace"))
        .args(["kernel", "norm", "--out"])
        .arg(dir.path().join("out"))
        .env("HALFSPACE_THREADS", "2")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_halfspace"))
        .args(["kernel", "norm", "--out"])
        .arg(dir.path().join("out"))
        .env("HALFSPACE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn fraclap_and_extend_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["fraclap"], None).status.code(), Some(0));
    let r = report(dir.path(), "fraclap.json");
    for row in r["result"]["results"].as_array().unwrap() {
        assert!(row["relative_difference"].as_f64().unwrap() < 1e-2);
    }
    assert_eq!(run(dir.path(), &["extend"], None).status.code(), Some(0));
    let r = report(dir.path(), "extend.json");
    let vals = r["result"]["values"].as_array().unwrap();
    assert_eq!(vals.len(), 3);
    for v in vals {
        assert!(v["point"].is_array() && v["value"].is_f64() && v["error_estimate"].is_f64());
    }
}

#[test]
fn classify_neumann() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "n": 2, "a": 0.5,
        "scenario": {"kind": "neumann", "far_value": 3.0},
        "grid": {"half_width": 1.0, "tangential_nodes": 33}
    }"#;
    let out = run(dir.path(), &["classify"], Some(cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "classify.json");
    assert!((r["result"]["fit"]["c2"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert!(r["result"]["tangential_variation"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn kernel_eval_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"n": 2, "kernel": {"kind": "poisson_type", "a": 1.5}, "points": [[0.0, 1.0]]}"#;
    let out = run(dir.path(), &["kernel", "eval"], Some(cfg));
    assert_eq!(out.status.code(), Some(1));
    let cfg = r#"{"n": 2, "kernel": {"kind": "poisson_type", "a": 0.0}, "points": [[0.0, 1.0]]}"#;
    let out = run(dir.path(), &["kernel", "eval"], Some(cfg));
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "kernel_eval.json");
    assert_eq!(r["result"]["values"][0]["value"].as_f64().unwrap(), 1.0);
}
