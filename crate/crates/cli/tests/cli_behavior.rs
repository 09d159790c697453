//! CLI contract tests: exit-code taxonomy, single-line diagnostics, and the
//! log env var never touching output content.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_csp")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("csp-behavior-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, content: &str) -> PathBuf {
    let path = tmp(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn assert_single_error_line(output: &Output, code: &str) {
    let stderr = String::from_utf8_lossy(&output.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(
        lines.len(),
        1,
        "expected one diagnostic line, got: {stderr}"
    );
    assert!(
        lines[0].starts_with(&format!("error: {code} ")),
        "unexpected diagnostic: {}",
        lines[0]
    );
}

#[test]
fn build_dag_digit_tree_writes_expected_counts() {
    let out = tmp("digit2.json");
    let output = run(&[
        "build-dag",
        "--kind",
        "digit-tree",
        "--k",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("{\"nodes\":111,"));

    let out = tmp("interval.json");
    let output = run(&[
        "build-dag",
        "--kind",
        "interval",
        "--lo",
        "0",
        "--hi",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("{\"nodes\":6,"));
}

#[test]
fn cyclic_hierarchy_exits_2() {
    let cyclic = write("cyclic.tsv", "a\tb\nb\ta\n");
    let output = run(&[
        "build-dag",
        "--kind",
        "from-file",
        "--input",
        cyclic.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert_single_error_line(&output, "cycle-detected");
}

fn forest_inputs() -> (PathBuf, PathBuf) {
    let dag = write(
        "forest.json",
        r#"{"nodes": 4, "edges": [[0,2],[1,3]], "leaves": [2,3]}"#,
    );
    let records = write(
        "forest.jsonl",
        "{\"probs\": [0.5, 0.5], \"true_leaf\": 2}\n",
    );
    (dag, records)
}

#[test]
fn predict_reports_labeled_sets_and_empty_set_at_zero() {
    let dag = write(
        "labeled_tree.json",
        r#"{"nodes": 6, "edges": [[0,1],[0,2],[1,3],[1,4],[2,5]], "leaves": [3,4,5], "labels": {"0":"root","1":"A","2":"B","3":"a1","4":"a2","5":"b1"}}"#,
    );
    let records = write("one_score.jsonl", "{\"probs\": [0.5, 0.2, 0.3]}\n");
    let predict_at = |tau: &str| -> serde_json::Value {
        let out = tmp("pred_line.jsonl");
        let output = run(&[
            "predict",
            "--dag",
            dag.to_str().unwrap(),
            "--records",
            records.to_str().unwrap(),
            "--tau",
            tau,
            "--m",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "tau {tau}");
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap()
    };
    // covering 0.6 takes internal node A (two leaves); its label comes along
    let set = predict_at("0.6");
    assert_eq!(set["nodes"], serde_json::json!([1]));
    assert_eq!(set["labels"], serde_json::json!(["A"]));
    assert_eq!(set["size"], serde_json::json!(2));
    // a zero threshold is satisfied by the empty selection
    let empty = predict_at("0");
    assert_eq!(empty["nodes"], serde_json::json!([]));
    assert_eq!(empty["size"], serde_json::json!(0));
}

#[test]
fn infeasible_predict_exits_4() {
    let (dag, records) = forest_inputs();
    let output = run(&[
        "predict",
        "--dag",
        dag.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
        "--tau",
        "0.9",
        "--m",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(4));
    assert_single_error_line(&output, "infeasible");
}

#[test]
fn sentinel_under_strict_exits_3() {
    let (dag, _) = forest_inputs();
    // truth never covered at any threshold under m = 1 on half the mass
    let hopeless = write(
        "hopeless.jsonl",
        &"{\"probs\": [0.5, 0.5], \"true_leaf\": 3}\n".repeat(20),
    );
    let out = tmp("sentinel.json");
    let output = run(&[
        "calibrate",
        "--dag",
        dag.to_str().unwrap(),
        "--records",
        hopeless.to_str().unwrap(),
        "--guarantee",
        "marginal",
        "--epsilon",
        "0.01",
        "--m",
        "1",
        "--grid",
        "0.4,0.3",
        "--strict",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert_single_error_line(&output, "sentinel");
    // outcome is still written for audit
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"sentinel\": true"));
}

#[test]
fn log_env_var_never_changes_output() {
    let out_quiet = tmp("quiet.json");
    let out_loud = tmp("loud.json");
    let base = ["build-dag", "--kind", "digit-tree", "--k", "2", "--out"];
    let quiet = Command::new(bin())
        .args(base)
        .arg(&out_quiet)
        .output()
        .unwrap();
    let loud = Command::new(bin())
        .args(base)
        .arg(&out_loud)
        .env("CSP_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(quiet.status.code(), loud.status.code());
    assert_eq!(quiet.stdout, loud.stdout);
    assert_eq!(
        std::fs::read(&out_quiet).unwrap(),
        std::fs::read(&out_loud).unwrap()
    );
}

/// n = 200 calibration records on a flat 10-leaf tree, peaked scores with a
/// controllable number of off-peak truths. At thresholds at or below the
/// peak mass the optimum is the bare peak leaf, so the off-peak records all
/// miss; above it only the root is feasible and nothing misses. The pac test
/// at (epsilon 0.1, delta 0.01, n 200) tolerates at most 10 misses, so 11
/// off-peak truths pin tau_hat one grid step above the peak mass while 10
/// let the walk run to the bottom of the grid.
fn pac_records(off_peak: usize) -> String {
    let mut out = String::new();
    for i in 0..200 {
        let truth = if i < off_peak { 2 } else { 1 };
        out.push_str(&format!(
            "{{\"probs\": [0.91, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01], \"true_leaf\": {truth}}}\n"
        ));
    }
    out
}

#[test]
fn pac_calibration_matches_frozen_miss_budget() {
    let dag = tmp("flat10.json");
    let status = Command::new(bin())
        .args(["build-dag", "--kind", "digit-tree", "--k", "1", "--out"])
        .arg(&dag)
        .status()
        .unwrap();
    assert!(status.success());

    let run_calibration = |records_file: &PathBuf| -> serde_json::Value {
        let out = tmp("pac_outcome.json");
        let output = run(&[
            "calibrate",
            "--dag",
            dag.to_str().unwrap(),
            "--records",
            records_file.to_str().unwrap(),
            "--guarantee",
            "pac",
            "--epsilon",
            "0.1",
            "--delta",
            "0.01",
            "--m",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0));
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap()
    };

    // 11 misses exceed the budget of 10: the walk stops at tau = 0.91
    let eleven = write("pac11.jsonl", &pac_records(11));
    let outcome = run_calibration(&eleven);
    assert_eq!(outcome["tau_hat"].as_f64(), Some(0.92));
    let audits = outcome["per_threshold"].as_array().unwrap();
    let last = audits.last().unwrap();
    assert_eq!(last["miss"].as_u64(), Some(11));
    assert_eq!(last["pass"].as_bool(), Some(false));

    // 10 misses sit exactly on the budget: every threshold passes
    let ten = write("pac10.jsonl", &pac_records(10));
    let outcome = run_calibration(&ten);
    assert_eq!(outcome["tau_hat"].as_f64(), Some(0.5));
    assert_eq!(outcome["sentinel"].as_bool(), Some(false));
}

#[test]
fn evaluate_requires_exactly_one_threshold_source() {
    let (dag, records) = forest_inputs();
    let output = run(&[
        "evaluate",
        "--dag",
        dag.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert_single_error_line(&output, "bad-spec");
}

#[test]
fn predict_honors_inline_record_dag() {
    let shared = write(
        "shared.json",
        r#"{"nodes": 3, "edges": [[0,1],[0,2]], "leaves": [1,2]}"#,
    );
    // second record swaps in a diamond with a single leaf
    let records = write(
        "mixed.jsonl",
        concat!(
            "{\"probs\": [0.8, 0.2]}\n",
            "{\"probs\": [1.0], \"dag\": {\"nodes\": 4, \"edges\": [[0,1],[0,2],[1,3],[2,3]], \"leaves\": [3]}}\n",
        ),
    );
    let out = tmp("mixed_pred.jsonl");
    let output = run(&[
        "predict",
        "--dag",
        shared.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
        "--tau",
        "0.7",
        "--m",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["covered_leaves"], serde_json::json!([1]));
    let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(second["covered_leaves"], serde_json::json!([3]));
    assert_eq!(second["size"], serde_json::json!(1));
}

#[test]
fn malformed_records_exit_2() {
    let dag = write(
        "tree.json",
        r#"{"nodes": 3, "edges": [[0,1],[0,2]], "leaves": [1,2]}"#,
    );
    let records = write("bad.jsonl", "{\"probs\": [0.5, 0.5]}\nnot json\n");
    let output = run(&[
        "predict",
        "--dag",
        dag.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
        "--tau",
        "0.5",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert_single_error_line(&output, "parse");
}
