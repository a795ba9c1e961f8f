use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn robsens() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_robsens"));
    // keep the tests independent of the caller's environment
    for (k, _) in std::env::vars() {
        if k.starts_with("ROBSENS_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    robsens().args(args).output().expect("spawn robsens")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn validate(report: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.v1.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> =
        validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

fn simulated(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = run(&["simulate", "--n", &n.to_string(), "--seed", &seed.to_string()]);
    assert!(out.status.success());
    let path = dir.join(format!("sim_{n}_{seed}.csv"));
    std::fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn simulate_writes_csv_with_header() {
    let out = run(&["simulate", "--n", "25", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,z,x"));
    assert_eq!(lines.count(), 25);
    // deterministic under the seed
    let again = run(&["simulate", "--n", "25", "--seed", "4"]);
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
}

#[test]
fn bounds_report_validates_and_collapses_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 120, 9);
    let report = json(&run(&["bounds", "--input", data.to_str().unwrap(), "--lambda", "1,2", "--delta", "0,0.1"]));
    validate(&report);
    assert_eq!(report["command"], "bounds");
    let rows = report["results"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let first = &rows[0];
    assert_eq!(first["lambda1"], 1.0);
    assert_eq!(first["delta1"], 0.0);
    let (lo, hi) = (first["tau_min"].as_f64().unwrap(), first["tau_max"].as_f64().unwrap());
    assert!((hi - lo).abs() < 1e-8, "collapse at (1, 0): [{lo}, {hi}]");
    for r in rows {
        assert!(r["tau_min"].as_f64().unwrap() <= lo + 1e-8 && hi <= r["tau_max"].as_f64().unwrap() + 1e-8);
    }
}

#[test]
fn exact_bounds_inside_relaxed() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 40, 2);
    let args = ["bounds", "--input", data.to_str().unwrap(), "--lambda", "2", "--delta", "0.2"];
    let relaxed = json(&run(&args));
    let mut exact_args = args.to_vec();
    exact_args.push("--milp");
    let exact = json(&run(&exact_args));
    validate(&exact);
    let (r, e) = (&relaxed["results"][0], &exact["results"][0]);
    assert_eq!(e["status"], "exact");
    assert!(r["tau_min"].as_f64().unwrap() <= e["tau_min"].as_f64().unwrap() + 1e-7);
    assert!(e["tau_max"].as_f64().unwrap() <= r["tau_max"].as_f64().unwrap() + 1e-7);
}

#[test]
fn ci_smoke_run_validates() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 100, 5);
    for model in ["separate", "whole"] {
        let report = json(&run(&[
            "ci",
            "--input",
            data.to_str().unwrap(),
            "--lambda",
            "1.5",
            "--delta",
            "0.05",
            "--bootstrap",
            "10",
            "--seed",
            "8",
            "--model",
            model,
        ]));
        validate(&report);
        let row = &report["results"][0];
        assert_eq!(row["replicates"], 10);
        assert_eq!(row.get("sharper").is_some(), model == "whole");
    }
}

#[test]
fn ci_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 80, 6);
    let go = |threads: &str| {
        let r = json(&run(&[
            "ci",
            "--input",
            data.to_str().unwrap(),
            "--lambda",
            "2",
            "--delta",
            "0.1",
            "--bootstrap",
            "12",
            "--seed",
            "3",
            "--threads",
            threads,
        ]));
        r["results"].clone()
    };
    assert_eq!(go("1"), go("3"));
}

#[test]
fn ci_out_dir_writes_report_and_draws() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 60, 1);
    let out = dir.path().join("out");
    let status = run(&[
        "ci",
        "--input",
        data.to_str().unwrap(),
        "--bootstrap",
        "10",
        "--lambda",
        "2",
        "--delta",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("ci.json")).unwrap()).unwrap();
    validate(&report);
    let draws = std::fs::read_to_string(out.join("draws_0.csv")).unwrap();
    let mut lines = draws.lines();
    assert_eq!(lines.next(), Some("b,tau_min_b,tau_max_b"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn curve_has_requested_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 100, 7);
    let report = json(&run(&["curve", "--input", data.to_str().unwrap(), "--bootstrap", "10", "--points", "4"]));
    validate(&report);
    let lb = report["results"]["lower_bounds"].as_array().unwrap();
    assert_eq!(lb.len(), 4);
    let v: Vec<f64> = lb.iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(v.windows(2).all(|w| 1.0 <= w[0] && w[0] <= w[1]));

    let csv =
        run(&["curve", "--input", data.to_str().unwrap(), "--bootstrap", "10", "--points", "5", "--format", "csv"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("q,lambda_lower"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn fit_report_validates() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 90, 3);
    let report = json(&run(&["fit", "--input", data.to_str().unwrap()]));
    validate(&report);
    assert!(report["results"]["score_norm"].as_f64().unwrap() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 40, 1);
    let input = data.to_str().unwrap();
    let code = |args: &[&str]| run(args).status.code().unwrap();

    assert_eq!(code(&["bounds", "--input", "/nonexistent/data.csv"]), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,z,x\n1,2,0.5\n").unwrap();
    assert_eq!(code(&["bounds", "--input", bad.to_str().unwrap()]), 2);
    assert_eq!(code(&["bounds", "--input", input, "--lambda", "0.5"]), 4);
    assert_eq!(code(&["bounds", "--input", input, "--delta", "1.5"]), 4);
    assert_eq!(code(&["bounds", "--input", input, "--no-such-flag"]), 4);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(code(&["bounds", "--input", input, "--config", cfg.to_str().unwrap()]), 4);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn precedence_defaults_config_env_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 50, 2);
    let input = data.to_str().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"bootstrap": {"replicates": 7, "seed": 5}}"#).unwrap();
    let replicates = |out: Output| json(&out)["config"]["bootstrap"]["replicates"].as_u64().unwrap();

    assert_eq!(replicates(run(&["bounds", "--input", input])), 1000);
    assert_eq!(replicates(run(&["bounds", "--input", input, "--config", cfg.to_str().unwrap()])), 7);
    let env = robsens()
        .args(["bounds", "--input", input, "--config", cfg.to_str().unwrap()])
        .env("ROBSENS_BOOTSTRAP", "9")
        .output()
        .unwrap();
    assert_eq!(replicates(env), 9);
    let flag = robsens()
        .args(["bounds", "--input", input, "--config", cfg.to_str().unwrap(), "--bootstrap", "11"])
        .env("ROBSENS_BOOTSTRAP", "9")
        .output()
        .unwrap();
    assert_eq!(replicates(flag), 11);
    // untouched config values survive
    let r = json(&run(&["bounds", "--input", input, "--config", cfg.to_str().unwrap()]));
    assert_eq!(r["seed"], 5);
}

#[test]
fn dump_lp_writes_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 20, 2);
    let lp = dir.path().join("model.lp");
    let out = run(&[
        "bounds",
        "--input",
        data.to_str().unwrap(),
        "--lambda",
        "2",
        "--delta",
        "0.1",
        "--dump-lp",
        lp.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(lp).unwrap();
    assert!(!text.trim().is_empty());
}

#[test]
fn schema_rejects_malformed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 40, 3);
    let good = json(&run(&["bounds", "--input", data.to_str().unwrap()]));
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.v1.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&good));
    let mut bad = good.clone();
    bad["schema_version"] = "robsens.report.v0".into();
    assert!(!validator.is_valid(&bad));
    let mut bad = good.clone();
    bad["results"][0]["status"] = "optimal".into();
    assert!(!validator.is_valid(&bad));
    let mut bad = good;
    bad.as_object_mut().unwrap().remove("seed");
    assert!(!validator.is_valid(&bad));
}
