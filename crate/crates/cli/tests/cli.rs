//! End-to-end runs of the `hardneg` binary.

use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn hardneg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardneg")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("JSON error object on stderr")
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, contents).unwrap();
    p
}

fn instance(dir: &TempDir, name: &str, x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> PathBuf {
    let v = serde_json::json!({ "x1": x1, "x2": x2, "y1": y1, "y2": y2 });
    write(dir, name, &v.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shared_endpoint_has_zero_distance() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
    for variant in ["arc", "segment"] {
        let v = stdout_json(&hardneg(&["solve", s(&p), "--variant", variant]));
        assert_eq!(v["variant"], variant);
        assert_eq!(v["distance"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.json", "{\"x1\": [1, 0,");
    let out = hardneg(&["solve", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ParseError");
    let missing = hardneg(&["solve", s(&dir.path().join("absent.json"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn antipodal_arc_is_rejected() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]);
    let out = hardneg(&["solve", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_json(&out);
    assert_eq!(e["error"], "DegenerateArc");
    assert_eq!(e["exit_code"], 2);
}

#[test]
fn solver_agrees_with_oracle_subcommand() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[0.2, 0.9, -0.1, 0.4], &[0.7, -0.3, 0.5, 0.1], &[-0.4, 0.3, 0.8, 0.2], &[0.1, 0.1, -0.6, 0.9]);
    for variant in ["arc", "segment"] {
        let sol = stdout_json(&hardneg(&["solve", s(&p), "--variant", variant]))["distance"].as_f64().unwrap();
        let coarse = stdout_json(&hardneg(&["oracle", s(&p), "--variant", variant, "--resolution", "0.002"]));
        let fine = stdout_json(&hardneg(&["oracle", s(&p), "--variant", variant, "--resolution", "0.001"]));
        let (c, f) = (coarse["best_distance"].as_f64().unwrap(), fine["best_distance"].as_f64().unwrap());
        assert!(f <= c, "{variant}: refinement increased the minimum");
        assert!(sol <= f + 1e-9 && f - sol <= 2e-3, "{variant}: {sol} vs {f}");
    }
}

#[test]
fn point_arc_oracle_matches_solver() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
    let sol = stdout_json(&hardneg(&["solve", s(&p)]))["distance"].as_f64().unwrap();
    let grid = stdout_json(&hardneg(&["oracle", s(&p)]));
    assert!((sol - std::f64::consts::SQRT_2).abs() < 1e-12);
    assert!((grid["best_distance"].as_f64().unwrap() - sol).abs() < 1e-12);
    assert_eq!(grid["best_params"][0].as_f64().unwrap(), 0.0);
}

#[test]
fn sweep_writes_summary_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = hardneg(&["oracle", "--sweep", "12", "--seed", "5", "--resolution", "0.002", "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("oracle_summary.csv")).unwrap();
    assert!(summary.starts_with("statistic,value\n"));
    assert!(summary.contains("instances,12\n"));
    assert!(summary.contains("violations,0\n"));
    let rows = fs::read_to_string(out_dir.join("oracle_sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 13);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["command"], "oracle --sweep");
    assert!(manifest["timestamp"].as_u64().unwrap() > 0);

    let again = hardneg(&["oracle", "--sweep", "12", "--seed", "5", "--resolution", "0.002"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), summary);
}

fn attr(node: &roxmltree::Node<'_, '_>, name: &str) -> f64 {
    node.attribute(name).unwrap().parse().unwrap()
}

/// Winner marker position relative to the parameter box: `(x, y, box)`.
fn winner_in_box(svg: &str) -> (f64, f64, [f64; 4]) {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let find = |id: &str| doc.descendants().find(|n| n.attribute("id") == Some(id)).unwrap();
    let w = find("winner");
    let b = find("box");
    (attr(&w, "cx"), attr(&w, "cy"), [attr(&b, "x"), attr(&b, "y"), attr(&b, "width"), attr(&b, "height")])
}

#[test]
fn cases_highlights_interior_winner() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[1.0, 0.0, 0.3, 0.0], &[0.0, 1.0, 0.3, 0.0], &[1.0, 0.8, -1.0, 0.5], &[0.8, 1.0, 1.0, 0.5]);
    assert_eq!(stdout_json(&hardneg(&["solve", s(&p)]))["candidate"]["case_id"], 0);
    let out = hardneg(&["cases", s(&p)]);
    assert!(out.status.success());
    let (x, y, [bx, by, bw, bh]) = winner_in_box(&String::from_utf8(out.stdout).unwrap());
    assert!(x > bx + 1.0 && x < bx + bw - 1.0 && y > by + 1.0 && y < by + bh - 1.0);
}

#[test]
fn cases_highlights_corner_winner() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.9, -0.3, 0.2], &[0.3, -0.9, 0.3]);
    assert_eq!(stdout_json(&hardneg(&["solve", s(&p)]))["candidate"]["case_id"], 5);
    let out_dir = dir.path().join("fig");
    assert!(hardneg(&["cases", s(&p), "--out-dir", s(&out_dir)]).status.success());
    let svg = fs::read_to_string(out_dir.join("cases.svg")).unwrap();
    let (x, y, [bx, by, _, bh]) = winner_in_box(&svg);
    // Case 5 is α = β = 0: the lower-left corner.
    assert!((x - bx).abs() < 0.02 && (y - (by + bh)).abs() < 0.02, "{x},{y} vs box {bx},{by}+{bh}");
    assert!(out_dir.join("manifest.json").exists());
    let seg = hardneg(&["cases", s(&p), "--variant", "segment"]);
    winner_in_box(&String::from_utf8(seg.stdout).unwrap());
}

fn small_config(dir: &TempDir, steps: usize) -> PathBuf {
    let cfg = serde_json::json!({
        "spec": { "num_classes": 3, "samples_per_class": 4, "dimension": 5, "concentration": 8.0, "seed": 0 },
        "losses": ["triplet", "loop_triplet"],
        "steps": steps,
        "seeds": [0, 1],
        "recall_ks": [1, 2]
    });
    write(dir, "config.json", &cfg.to_string())
}

#[test]
fn experiment_with_zero_steps_reports_initial_metrics() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir, 0);
    let out_dir = dir.path().join("exp");
    let out = hardneg(&["experiment", s(&cfg), "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 2);
    assert!(metrics.lines().skip(1).all(|l| l.split(',').nth(2) == Some("0")));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"].as_array().unwrap().len(), 2);
    assert_eq!(summary["final_evals"].as_array().unwrap().len(), 4);
}

#[test]
fn paired_histories_share_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir, 5);
    let out_dir = dir.path().join("exp");
    assert!(hardneg(&["experiment", s(&cfg), "--out-dir", s(&out_dir)]).status.success());
    let seeds = |name: &str| -> Vec<String> {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        text.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect()
    };
    let (a, b) = (seeds("history_triplet.csv"), seeds("history_loop_triplet.csv"));
    assert_eq!(a.len(), 2 * 6);
    assert_eq!(a, b);
    // Identical inputs give identical histories.
    let again = dir.path().join("exp2");
    assert!(hardneg(&["experiment", s(&cfg), "--out-dir", s(&again)]).status.success());
    assert_eq!(
        fs::read(out_dir.join("metrics.csv")).unwrap(),
        fs::read(again.join("metrics.csv")).unwrap()
    );
}

#[test]
fn invalid_config_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "config.json", r#"{"losses": []}"#);
    let out = hardneg(&["experiment", s(&cfg), "--out-dir", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ConfigError");
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let p = instance(&dir, "i.json", &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]);
    let blocker = write(&dir, "blocker", "");
    let out = hardneg(&["cases", s(&p), "--out-dir", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "OutputError");
}

#[test]
fn generate_table_and_loss_round_trip() {
    let dir = TempDir::new().unwrap();
    let out = hardneg(&["generate", "--classes", "3", "--per-class", "4", "--dim", "6", "--seed", "2"]);
    assert!(out.status.success());
    let batch = write(&dir, "batch.csv", &String::from_utf8(out.stdout).unwrap());
    let table = hardneg(&["table", s(&batch)]);
    assert!(table.status.success());
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.starts_with("i,j,k,l,distance\n"));
    // 12 samples, 4 per class: 12·8/8 = 12 combinations, each in both orientations.
    assert_eq!(text.lines().count(), 1 + 2 * 12);

    let plain = stdout_json(&hardneg(&["loss", s(&batch), "--loss", "triplet"]));
    let lo = stdout_json(&hardneg(&["loss", s(&batch), "--loss", "loop_triplet"]));
    assert!(lo["total"].as_f64().unwrap() >= plain["total"].as_f64().unwrap() - 1e-9);
    let out_dir = dir.path().join("loss");
    assert!(hardneg(&["loss", s(&batch), "--loss", "ms", "--out-dir", s(&out_dir)]).status.success());
    assert!(fs::read_to_string(out_dir.join("terms.csv")).unwrap().starts_with("term,contribution\n"));

    let odd = write(&dir, "odd.csv", "0,1,0,0\n0,0,1,0\n1,0,0,1\n");
    let bad = hardneg(&["table", s(&odd)]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr_json(&bad)["error"], "BatchError");
}
