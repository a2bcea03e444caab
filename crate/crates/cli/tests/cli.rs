use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cramer-bodies"))
        .args(args)
        .env_remove("CRAMER_BODIES_THREADS")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON error")
}

fn statement<'a>(doc: &'a Value, id: &str) -> &'a Value {
    doc["statements"].as_array().unwrap().iter().find(|s| s["id"] == id).unwrap_or_else(|| panic!("no statement {id}"))
}

#[test]
fn transform_gaussian_point() {
    let doc = json_stdout(&run(&["transform", "--zoo", "gaussian", "--dim", "2", "--point", "2,0", "--point", "1,1"]));
    let rows = doc["results"]["cramer"].as_array().unwrap();
    assert!((rows[0]["value"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert!((rows[1]["value"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(rows[0]["status"], "converged");
    assert_eq!(doc["schema"], "1");
    assert_eq!(doc["command"], "transform");
}

#[test]
fn transform_inline_model_and_ray() {
    let model = r#"{"kind":"product_factors","dimension":1,"params":{"factors":[{"type":"exponential","rate":1.0}]}}"#;
    let doc = json_stdout(&run(&["transform", "--model", model, "--ray", "1", "--ray-max", "2", "--ray-count", "4"]));
    let rows = doc["results"]["cramer"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let x = r["x"][0].as_f64().unwrap();
        assert!((r["value"].as_f64().unwrap() - (x - x.ln_1p())).abs() < 1e-8);
    }
}

#[test]
fn transform_pushforward_model() {
    let model = r#"{"kind":"affine_pushforward","dimension":2,
        "params":{"base":{"kind":"isotropic_gaussian","dimension":2},"matrix":[[2,0],[0,1]]}}"#;
    let doc = json_stdout(&run(&["transform", "--model", model, "--point", "2,1"]));
    // N(0, diag(4, 1))
    assert!((doc["results"]["cramer"][0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn cube_boundary_diverges() {
    let doc = json_stdout(&run(&["transform", "--zoo", "cube", "--dim", "1", "--point", "0.5"]));
    assert_eq!(doc["results"]["cramer"][0]["status"], "diverged_to_infinity");
}

#[test]
fn malformed_input_exits_2() {
    let out = run(&["transform", "--model", "{not json", "--point", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["exit_code"], 2);

    let out = run(&["transform", "--zoo", "gaussian", "--dim", "2", "--point", "1,2,3"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["bodies", "--zoo", "gaussian", "--dim", "2", "--family", "Q", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["schema"], "1");

    let out = run(&["transform", "--point", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn k_body_beyond_range_exits_3() {
    let out = run(&["bodies", "--zoo", "gaussian", "--dim", "2", "--family", "K", "--t", "600"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_of(&out)["error"]["kind"], "range");
}

#[test]
fn bodies_csv_for_gaussian() {
    let out = run(&["bodies", "--zoo", "gaussian", "--dim", "2", "--family", "B", "--t", "2,8", "--directions", "8"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,t,dir_index,theta_0,theta_1,value"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in rows {
        let t: f64 = r[1].parse().unwrap();
        let v: f64 = r[5].parse().unwrap();
        assert!((v - (2.0 * t).sqrt()).abs() < 1e-7);
    }
}

#[test]
fn floating_sandwich_on_gaussian() {
    let doc = json_stdout(&run(&["inclusions", "--zoo", "gaussian", "--dim", "2", "--claim", "floating", "--directions", "64"]));
    assert_eq!(statement(&doc, "floating")["passed"], true);
}

#[test]
fn unknown_claim_is_an_input_error() {
    let out = run(&["inclusions", "--zoo", "gaussian", "--dim", "2", "--claim", "no-such-claim"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_on_empty_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["report", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threshold_window_brackets_tau() {
    let doc = json_stdout(&run(&[
        "threshold", "--zoo", "gaussian", "--dim", "2", "--reps", "32", "--test-points", "500", "--tau-samples", "20000",
    ]));
    let scan = &doc["results"]["scan"];
    let (r1, r2) = (scan["rho1"].as_f64().unwrap(), scan["rho2"].as_f64().unwrap());
    let (tau, se) = (scan["tau"].as_f64().unwrap(), scan["tau_stderr"].as_f64().unwrap());
    assert!(r1 <= tau + 3.0 * se && tau - 3.0 * se <= r2, "{r1} {tau} {r2}");
    assert_eq!(statement(&doc, "threshold-window")["passed"], true);
}

fn run_into(dir: &Path, args: &[&str]) {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    let out = run(&all);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const MOMENTS: &[&str] = &["moments", "--zoo", "exponential", "--dim", "2", "--samples", "5000", "--p", "1,2", "--seed", "7"];
const DEPTH: &[&str] = &["depth", "--zoo", "cube", "--dim", "2", "--random", "50", "--negative-p", "0.05", "--samples", "2000", "--seed", "7"];

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(a.path(), "1"), (b.path(), "3")] {
        run_into(dir, &[MOMENTS, &["--threads", threads]].concat());
        run_into(dir, &[DEPTH, &["--threads", threads]].concat());
    }
    for name in ["moments.json", "depth.json", "manifest.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn report_aggregates_statements() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), MOMENTS);
    run_into(dir.path(), &["inclusions", "--zoo", "gaussian", "--dim", "2", "--claim", "floating", "--directions", "32", "--tag", "g"]);
    let out = run(&["report", "--dir", dir.path().to_str().unwrap()]);
    let doc = json_stdout(&out);
    let text = doc.to_string();
    assert!(text.contains("floating"), "{text}");
    assert!(text.contains("lp-moment-1"), "{text}");
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["artifacts"]["moments.json"].is_object());
    assert!(manifest["artifacts"]["inclusions-floating-g.json"].is_object());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"seed": 11, "budgets": {"samples": 3000}}"#).unwrap();
    let doc = json_stdout(&run(&[
        "moments", "--config", cfg.to_str().unwrap(), "--zoo", "gaussian", "--dim", "2", "--seed", "12", "--p", "1",
    ]));
    assert_eq!(doc["config"]["seed"], 12);
    assert_eq!(doc["config"]["budgets"]["samples"], 3000);

    fs::write(&cfg, r#"{"seed": 11, "unknown_field": 1}"#).unwrap();
    let out = run(&["moments", "--config", cfg.to_str().unwrap(), "--zoo", "gaussian", "--dim", "2"]);
    assert_eq!(out.status.code(), Some(2));
}
