//! End-to-end tests of the `onebit-detect` binary: exit codes, output
//! schemas, manifests, determinism, and configuration handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onebit-detect"))
}

fn write_config(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// A small, fast ROC configuration over two correlation values.
const ROC_CONFIG: &str = r#"{
  "params": {"corr": 0.7, "snr_db": -5.0, "n": 300},
  "trials_per_point": 400,
  "seed": 19,
  "corr_grid": [0.4, 0.7],
  "output_path": "curves"
}"#;

#[test]
fn roc_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "roc.json", ROC_CONFIG);
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = bin()
            .args(["roc", "--config"])
            .arg(&config)
            .arg("--output-dir")
            .arg(&out_dir)
            .arg("--emit-svg")
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_str(&out));
        let mut names: Vec<_> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            [
                "curves.svg",
                "curves_corr_0.4.csv",
                "curves_corr_0.7.csv",
                "curves_manifest.json"
            ]
        );
        bytes.push(
            names
                .iter()
                .map(|n| fs::read(out_dir.join(n)).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn manifest_digests_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "roc.json", ROC_CONFIG);
    let out = bin()
        .args(["roc", "--config"])
        .arg(&config)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("curves_manifest.json")).unwrap())
            .unwrap();
    for key in ["run_id", "tool_version", "subcommand", "seed", "mode", "resolved_config"] {
        assert!(manifest.get(key).is_some(), "manifest missing {key}");
    }
    assert_eq!(manifest["subcommand"], "roc");
    assert_eq!(manifest["seed"], 19);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for entry in outputs {
        let name = entry["path"].as_str().unwrap();
        let body = fs::read(dir.path().join(name)).unwrap();
        let digest = format!("{:x}", Sha256::digest(&body));
        assert_eq!(entry["sha256"].as_str().unwrap(), digest, "digest of {name}");
    }
}

#[test]
fn manifest_resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "roc.json", ROC_CONFIG);
    let first = dir.path().join("first");
    let out = bin()
        .args(["roc", "--config"])
        .arg(&config)
        .arg("--output-dir")
        .arg(&first)
        .arg("--set")
        .arg("params.corr=0.6")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("curves_manifest.json")).unwrap())
            .unwrap();
    // The resolved config alone must reproduce the run, overrides included.
    let replay = write_config(
        dir.path(),
        "replay.json",
        &manifest["resolved_config"].to_string(),
    );
    let second = dir.path().join("second");
    let out = bin()
        .args(["roc", "--config"])
        .arg(&replay)
        .arg("--output-dir")
        .arg(&second)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    for name in ["curves_corr_0.4.csv", "curves_corr_0.7.csv", "curves_manifest.json"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn unknown_key_is_named_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"params": {"corr": 0.5}, "trials": 10}"#,
    );
    let out = bin().args(["theory", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_str(&out);
    assert!(err.contains("trials"), "stderr does not name the key: {err}");
}

#[test]
fn missing_config_is_validation_error() {
    let out = bin().arg("theory").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_str(&out).contains("--config"));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // corr 0.85 at this noise level drives a pair-group covariance non-PD.
    let config = write_config(
        dir.path(),
        "hot.json",
        r#"{"params": {"corr": 0.85, "snr_db": 0.0}}"#,
    );
    let out = bin().args(["theory", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_str(&out));
    assert!(!stderr_str(&out).is_empty());
}

#[test]
fn svg_emitted_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "roc.json", ROC_CONFIG);
    let out_dir = dir.path().join("plain");
    let out = bin()
        .args(["roc", "--config"])
        .arg(&config)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let names: Vec<_> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(
        names.iter().all(|n| !n.ends_with(".svg")),
        "unexpected svg in {names:?}"
    );
}

#[test]
fn inputs_are_not_mutated() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "roc.json", ROC_CONFIG);
    let before = fs::read(&config).unwrap();
    let out = bin()
        .args(["roc", "--config"])
        .arg(&config)
        .arg("--output-dir")
        .arg(dir.path().join("out"))
        .arg("--set")
        .arg("seed=99")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&config).unwrap(), before);
}

#[test]
fn theory_stdout_is_json_with_expected_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "t.json", r#"{"params": {"corr": 0.7}}"#);
    let out = bin().args(["theory", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert_eq!(text.lines().count(), 1);
    let report: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    for key in ["mu0", "sigma0", "mu1", "sigma1", "pfa", "pd"] {
        assert!(
            report[key].is_number(),
            "theory output missing numeric {key}: {report}"
        );
    }
    let pfa = report["pfa"].as_f64().unwrap();
    let pd = report["pd"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pfa));
    assert!(pd > pfa, "detector should beat chance at these parameters");
}

#[test]
fn overrides_apply_in_order_last_wins() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "t.json", r#"{"params": {"corr": 0.4}}"#);
    let single = bin()
        .args(["theory", "--config"])
        .arg(&config)
        .args(["--set", "params.corr=0.7"])
        .output()
        .unwrap();
    let double = bin()
        .args(["theory", "--config"])
        .arg(&config)
        .args(["--set", "params.corr=0.55", "--set", "params.corr=0.7"])
        .output()
        .unwrap();
    assert!(single.status.success() && double.status.success());
    assert_eq!(stdout_str(&single), stdout_str(&double));
}

#[test]
fn detect_is_deterministic_and_reports_decision() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "d.json",
        r#"{"params": {"n": 8}, "detect": {"signs": [1, 1, 1, -1, -1, 1, -1, -1]}}"#,
    );
    let run = || {
        let out = bin().args(["detect", "--config"]).arg(&config).output().unwrap();
        assert!(out.status.success());
        stdout_str(&out)
    };
    let first = run();
    assert_eq!(first, run());
    let report: serde_json::Value = serde_json::from_str(first.trim()).unwrap();
    assert!(report["statistic"].is_number());
    assert!(report["threshold"].is_number());
    let decision = report["decision"].as_str().unwrap();
    assert!(decision == "h0" || decision == "h1");
}

#[test]
fn power_csv_has_schema_and_sweep_order() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "p.json",
        r#"{
          "params": {"corr": 0.7, "n": 300},
          "trials_per_point": 400,
          "seed": 5,
          "snr_grid_db": [-9.0, -6.0, -3.0],
          "fixed_pfa": 0.3
        }"#,
    );
    let out = bin()
        .args(["power", "--config"])
        .arg(&config)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = fs::read_to_string(dir.path().join("power.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,pd_emp,pd_emp_se,pd_theory");
    assert_eq!(lines.len(), 4);
    let first_cols: Vec<_> = lines[1].split(',').collect();
    assert_eq!(first_cols[0], "-9.00000000");
    let last_cols: Vec<_> = lines[3].split(',').collect();
    assert_eq!(last_cols[0], "-3.00000000");
}

#[test]
fn sensitivity_writes_one_file_per_label() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "s.json",
        r#"{
          "params": {"corr": 0.7, "n": 300},
          "trials_per_point": 400,
          "seed": 23,
          "perturbations": [
            {"label": "baseline"},
            {"p_hat_factor": 1.1, "label": "p_hat up"},
            {"a_factor": 0.9, "label": "a down"}
          ]
        }"#,
    );
    let out = bin()
        .args(["sensitivity", "--config"])
        .arg(&config)
        .arg("--output-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    for name in [
        "sensitivity_baseline.csv",
        "sensitivity_p_hat_up.csv",
        "sensitivity_a_down.csv",
        "sensitivity_manifest.json",
    ] {
        assert!(dir.path().join("out").join(name).exists(), "missing {name}");
    }
}

#[test]
fn validate_reports_every_check() {
    let out = bin()
        .args(["validate", "--set", "params.n=60", "--set", "seed=2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    let checks = text.lines().filter(|l| l.starts_with("check ")).count();
    assert_eq!(checks, 12);
    assert!(text.lines().all(|l| !l.contains("FAIL")), "{text}");
    assert!(text.contains("all 12 checks passed"));
}
