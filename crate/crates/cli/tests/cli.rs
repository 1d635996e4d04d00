//! CLI behavior: subcommand wiring, exit codes, and the standalone
//! evaluate command.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn aspectsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aspectsum"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn evaluate_scores_candidate_against_reference() {
    let dir = tempfile::tempdir().unwrap();
    let candidate = dir.path().join("candidate.txt");
    let reference = dir.path().join("reference.txt");
    std::fs::write(&candidate, "the cat sat on the mat").unwrap();
    std::fs::write(&reference, "the cat lay on the mat").unwrap();

    let output = aspectsum(&[
        "evaluate",
        "--candidate",
        candidate.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!((report["rouge2_f1"].as_f64().unwrap() - 0.6).abs() < 1e-9);
    assert!((report["rougeL_f1"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-9);
    assert_eq!(report["sentence_count"], 1);
}

#[test]
fn evaluate_writes_report_file_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let candidate = dir.path().join("candidate.txt");
    let reference = dir.path().join("reference.txt");
    let out = dir.path().join("metrics.json");
    std::fs::write(&candidate, "identical words").unwrap();
    std::fs::write(&reference, "identical words").unwrap();

    let output = aspectsum(&[
        "evaluate",
        "--candidate",
        candidate.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["rouge2_f1"], 1.0);
}

#[test]
fn missing_seed_fixtures_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = aspectsum(&[
        "run",
        "--input",
        fixtures_dir().join("reviews.jsonl").to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--backend",
        "mock",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("seed_fixtures"));
}

#[test]
fn unknown_config_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pipeline.conf");
    std::fs::write(&config, "topn = 3\n").unwrap();
    let output = aspectsum(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--input",
        fixtures_dir().join("reviews.jsonl").to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("topn"));
}

#[test]
fn unreadable_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = aspectsum(&[
        "run",
        "--input",
        dir.path().join("no-such-file.jsonl").to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--backend",
        "mock",
        "--seed-fixtures",
        fixtures_dir().join("mock_rules.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pipeline.conf");
    std::fs::write(
        &config,
        format!(
            "backend = mock\nseed_fixtures = {}\ntop_n = 2\n",
            fixtures_dir().join("mock_rules.jsonl").display()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = aspectsum(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--input",
        fixtures_dir().join("reviews.jsonl").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--top-n",
        "3",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let summary: serde_json::Value = serde_json::from_slice(
        &std::fs::read(out.join("trayco-ice-42/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["items"].as_array().unwrap().len(), 3);
}

#[test]
fn stage_subcommand_stops_before_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = aspectsum(&[
        "extract",
        "--input",
        fixtures_dir().join("reviews.jsonl").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--backend",
        "mock",
        "--seed-fixtures",
        fixtures_dir().join("mock_rules.jsonl").to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let product = out.join("trayco-ice-42");
    assert!(product.join("stages/arguments_raw.jsonl").exists());
    assert!(product.join("manifest.json").exists());
    assert!(!product.join("summary.txt").exists());
}
