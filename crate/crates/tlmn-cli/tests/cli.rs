//! End-to-end subcommand tests against the compiled binary, on a small
//! model so the full synth -> train -> evaluate -> predict chain runs in
//! seconds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tlmn"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn tlmn");
    assert!(
        out.status.success(),
        "tlmn {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// A config small enough that training two epochs takes seconds: one
/// training year, 44-wide manifold, 8 channels.
fn write_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "location": { "latitude": 15.65, "longitude": 32.48, "altitude": 380.0 },
        "split": { "train_years": [2010, 2010], "test_years": [2012, 2012] },
        "model": {
            "in_width": 44,
            "seq_len": 23,
            "channels": 8,
            "conv_kernel": 2,
            "dilations": [1, 2],
            "head_hidden": 4
        },
        "train": { "max_epochs": 2, "batch_size": 256, "seed": 7 },
        "synth": { "years": 3, "seed": 11 },
        "paths": {
            "data": dir.join("synth.csv"),
            "cache_dir": dir.join("cache"),
            "checkpoint": dir.join("model.tlmn3"),
            "report_dir": dir.join("report")
        }
    });
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn full_pipeline_synth_train_evaluate_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let cfg = cfg.to_str().unwrap();

    let out = run_ok(&["--config", cfg, "synth"]);
    let v = stdout_json(&out);
    // 2010 + 2011 + 2012 (leap) = 8760 + 8760 + 8784 hours.
    assert_eq!(v["rows"], 26304);
    assert!(dir.path().join("synth.csv").exists());

    let out = run_ok(&["--config", cfg, "features"]);
    let v = stdout_json(&out);
    assert_eq!(v["features"].as_array().unwrap().len(), 22);
    assert!(v["train_windows"].as_u64().unwrap() > 8000);
    assert!(v["test_windows"].as_u64().unwrap() > 8000);

    let out = run_ok(&["--config", cfg, "train"]);
    let v = stdout_json(&out);
    assert_eq!(v["epochs_run"], 2);
    assert!(dir.path().join("model.tlmn3").exists());
    assert!(dir.path().join("report/training_log.csv").exists());

    let out = run_ok(&["--config", cfg, "evaluate"]);
    let v = stdout_json(&out);
    let report = &v["report"];
    assert_eq!(report["night_noise"]["violating_hours"], 0);
    assert!(report["rmse_daylight"].as_f64().unwrap() > 0.0);
    // Effective config is echoed for provenance.
    assert_eq!(v["config"]["synth"]["seed"], 11);
    for f in [
        "eval_report.json",
        "diurnal_envelope.csv",
        "cumulative_abs_error.csv",
        "yearly_rmse.csv",
        "residual_hist.csv",
    ] {
        assert!(dir.path().join("report").join(f).exists(), "{f} missing");
    }

    // Identical config + seed must reproduce the report byte for byte.
    let again = run_ok(&["--config", cfg, "evaluate"]);
    assert_eq!(out.stdout, again.stdout);

    let synth_csv = dir.path().join("synth.csv");
    let out = run_ok(&[
        "--config",
        cfg,
        "predict",
        "--window",
        synth_csv.to_str().unwrap(),
    ]);
    let v = stdout_json(&out);
    let pred = v["ghi_pred"].as_f64().unwrap();
    let alpha = v["alpha"].as_f64().unwrap();
    let bound = v["ghi_clear_bound"].as_f64().unwrap();
    assert!(pred >= 0.0 && pred <= bound + 1e-9, "pred {pred} bound {bound}");
    assert!((0.0..=1.0).contains(&alpha));

    let out = run_ok(&[
        "--config",
        cfg,
        "audit",
        "--checkpoint",
        dir.path().join("model.tlmn3").to_str().unwrap(),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("[PASS]").count(), 3, "{text}");
    assert!(!text.contains("[FAIL]"), "{text}");
}

#[test]
fn clearsky_prints_24_rows_with_exact_nocturnal_zeros() {
    let out = run_ok(&[
        "clearsky",
        "--lat",
        "15.65",
        "--lon",
        "32.48",
        "--date",
        "2022-06-21",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 25);
    assert_eq!(lines[0], "hour_utc,ghi_clear_whm2");
    let mut nocturnal = 0;
    for line in &lines[1..] {
        let val = line.split(',').nth(1).unwrap();
        if val == "0" {
            nocturnal += 1;
        } else {
            assert!(val.parse::<f64>().unwrap() > 0.0);
        }
    }
    assert!(nocturnal >= 8, "expected nighttime zeros, got {nocturnal}");
}

#[test]
fn audit_without_checkpoint_uses_default_config() {
    let out = run_ok(&["audit"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("total                        63745"), "{text}");
    assert_eq!(text.matches("[PASS]").count(), 3, "{text}");
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = bin().args(["clearsky", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_single_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{ "sede": 42 }"#).unwrap();
    let out = bin()
        .args(["--config", path.to_str().unwrap(), "audit"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("sede"), "{err}");
}

#[test]
fn missing_checkpoint_is_a_clean_error() {
    let out = bin()
        .args(["evaluate", "--checkpoint", "/nonexistent/m.tlmn3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn predict_rejects_short_window_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    run_ok(&["--config", cfg.to_str().unwrap(), "synth"]);

    // Truncate the dataset to 10 rows (header + 9 data lines).
    let full = std::fs::read_to_string(dir.path().join("synth.csv")).unwrap();
    let short: String = full.lines().take(10).collect::<Vec<_>>().join("\n");
    let short_path = dir.path().join("short.csv");
    std::fs::write(&short_path, short).unwrap();

    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "predict",
            "--window",
            short_path.to_str().unwrap(),
            "--checkpoint",
            "/nonexistent/m.tlmn3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
