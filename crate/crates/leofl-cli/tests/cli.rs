//! Command-line contract: subcommand outputs, exit codes, and the
//! strictness of configuration parsing.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leofl"))
}

/// Small two-plane scenario that runs in well under a second.
fn small_scenario() -> String {
    r#"{
        "name": "cli-small",
        "walker": {
            "total": 8,
            "planes": 2,
            "phasing": 1,
            "inclination_deg": 70.0,
            "altitude_km": 780.0,
            "pattern": "star"
        },
        "parameter_server": {
            "kind": "satellite",
            "altitude_km": 2000.0,
            "inclination_deg": 45.0
        },
        "task": {
            "kind": "quadratic",
            "dimension": 2,
            "batch_size": 50,
            "learning_rate": 0.1,
            "local_steps": 1,
            "partition": "iid",
            "train_samples": 200,
            "test_samples": 100
        },
        "horizon_s": 7200.0,
        "step_s": 30.0,
        "eval_interval_s": 600.0
    }"#
    .to_string()
}

fn write_scenario(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("scenario.json");
    fs::write(&path, body).unwrap();
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn classify_prints_a_machine_readable_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(&dir, &small_scenario());
    let out = bin()
        .args(["classify", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success(), "classify failed: {}", stderr_of(&out));

    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let class = report["class"].as_str().unwrap();
    assert!(
        ["sporadic", "near-persistent", "inter-cluster"].contains(&class),
        "unexpected class {class}"
    );
    assert!(report["thresholds"]["min_duty_cycle"].is_number());
    assert!(report["thresholds"]["max_gap_s"].is_number());
    let clusters = report["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2, "one stats entry per orbital plane");
    for c in clusters {
        let duty = c["duty_cycle"].as_f64().unwrap();
        assert!(
            (0.0..=1.0).contains(&duty),
            "duty cycle {duty} out of range"
        );
        assert!(c["max_gap_s"].as_f64().unwrap() >= 0.0);
        assert!(c["window_count"].as_u64().is_some());
    }
}

#[test]
fn contacts_writes_windows_and_gantt_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(&dir, &small_scenario());
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["contacts", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "contacts failed: {}", stderr_of(&out));

    let windows = fs::read_to_string(out_dir.join("windows.csv")).unwrap();
    assert_eq!(
        windows.lines().next().unwrap(),
        "node_a,node_b,start_s,end_s"
    );
    assert!(
        windows.lines().count() > 1,
        "no contact windows were written"
    );

    let gantt = fs::read_to_string(out_dir.join("gantt.csv")).unwrap();
    assert_eq!(gantt.lines().next().unwrap(), "row,kind,intervals");
}

#[test]
fn unknown_config_keys_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(
        &dir,
        &small_scenario().replace("\"horizon_s\"", "\"horizon\""),
    );
    let out = bin()
        .args(["classify", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).starts_with("error:"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = bin()
        .args(["classify", "--config", "/nonexistent/scenario.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_override_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(&dir, &small_scenario());
    let out = bin()
        .args(["classify", "--config"])
        .arg(&config)
        .args(["--step", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("step_s"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn strategy_without_links_is_skipped_with_a_note() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(&dir, &small_scenario());
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .args([
            "--strategies",
            "fedavg-sync,fedavg-isl-aggregation",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "simulate failed: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("skipping fedavg-isl-aggregation"),
        "stderr: {}",
        stderr_of(&out)
    );

    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "only the runnable strategy produces a row");
    assert!(rows[0].starts_with("fedavg-sync,5,"), "row: {}", rows[0]);
    for suffix in ["metrics.csv", "trace.csv", "manifest.json"] {
        let path = out_dir.join(format!("fedavg-sync_seed5_{suffix}"));
        assert!(path.exists(), "missing {}", path.display());
    }
}

#[test]
fn no_runnable_strategy_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(&dir, &small_scenario());
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--strategies", "fedavg-isl-aggregation"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("no runnable strategy"),
        "stderr: {}",
        stderr_of(&out)
    );
}
