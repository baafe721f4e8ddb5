//! End-to-end tests through the compiled binary: artifact round-trips,
//! reproducibility of outputs, manifest contents and the error contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eclf")
}

/// Shared fast hyperparameters so pipeline-heavy commands stay quick.
fn small_model_flags() -> Vec<&'static str> {
    vec![
        "--lstm_trend.hidden",
        "6",
        "--lstm_trend.epochs",
        "8",
        "--lstm_random.hidden",
        "6",
        "--lstm_random.epochs",
        "8",
        "--gbt_trend.n_estimators",
        "40",
        "--gbt_random.n_estimators",
        "40",
    ]
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_dataset(dir: &Path) -> PathBuf {
    run_ok(
        dir,
        &["synth", "--seed", "42", "--years", "9", "--noise-sd", "22"],
    );
    dir.join("dataset.csv")
}

#[test]
fn synth_is_reproducible_and_manifested() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = fs::read(synth_dataset(dir_a.path())).unwrap();
    let b = fs::read(synth_dataset(dir_b.path())).unwrap();
    assert_eq!(a, b, "same seed must give identical bytes");

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir_a.path().join("synth_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["command"], "synth");
    assert!(manifest["outputs"]["dataset"]["fnv1a64"].is_string());

    // a different seed must change the contents
    let dir_c = tempfile::tempdir().unwrap();
    run_ok(
        dir_c.path(),
        &["synth", "--seed", "43", "--years", "9", "--noise-sd", "22"],
    );
    let c = fs::read(dir_c.path().join("dataset.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn decompose_emits_additive_components() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    run_ok(
        dir.path(),
        &["decompose", "--input", dataset.to_str().unwrap(), "--svg"],
    );

    let text = fs::read_to_string(dir.path().join("decomposition.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "date,observed,seasonal,trend,remainder"
    );
    let mut rows = 0;
    for line in lines {
        let cells: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|c| c.parse().unwrap())
            .collect();
        assert!((cells[1] + cells[2] + cells[3] - cells[0]).abs() <= 1e-9);
        rows += 1;
    }
    assert_eq!(rows, 108);
    let svg = fs::read_to_string(dir.path().join("decomposition.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn forecast_artifacts_are_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    let mut args = vec!["forecast", "--input", dataset.to_str().unwrap(), "--svg"];
    args.extend(small_model_flags());
    run_ok(dir.path(), &args);

    let first = fs::read(dir.path().join("forecast.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "date,s_hat,t_hat,r_hat,y_hat");
    let mut months = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        months.push(cells.next().unwrap().to_string());
        let nums: Vec<f64> = cells.map(|c| c.parse().unwrap()).collect();
        // component sum reproduces the total through the file boundary
        assert!((nums[0] + nums[1] + nums[2] - nums[3]).abs() <= 1e-9);
    }
    assert_eq!(months.first().unwrap(), "2021-01");
    assert_eq!(months.last().unwrap(), "2021-12");

    let diagnostics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diagnostics["variant"], "ECLF");
    assert_eq!(diagnostics["horizon"], 12);
    assert!(fs::read_to_string(dir.path().join("forecast.svg"))
        .unwrap()
        .starts_with("<svg"));

    // rerun into a fresh directory: primary artifact must be byte-identical
    let dir2 = tempfile::tempdir().unwrap();
    let dataset2 = synth_dataset(dir2.path());
    let mut args2 = vec!["forecast", "--input", dataset2.to_str().unwrap()];
    args2.extend(small_model_flags());
    run_ok(dir2.path(), &args2);
    let second = fs::read(dir2.path().join("forecast.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn ablate_emits_all_four_variants() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    let mut args = vec!["ablate", "--input", dataset.to_str().unwrap()];
    args.extend(small_model_flags());
    run_ok(dir.path(), &args);

    let text = fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variant,mape");
    let variants: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(variants, ["ECLF", "EC-Neither", "EC-RC", "EC-TC"]);
    for line in &lines[1..] {
        let mape: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(mape >= 0.0 && mape.is_finite());
    }
}

#[test]
fn select_features_emits_selection_json() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    run_ok(
        dir.path(),
        &[
            "select-features",
            "--input",
            dataset.to_str().unwrap(),
            "--component",
            "random",
        ],
    );
    let selection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("selection.json")).unwrap())
            .unwrap();
    assert_eq!(selection["component"], "random");
    assert!(!selection["selected"].as_array().unwrap().is_empty());
    let ranked = selection["ranked"].as_array().unwrap();
    assert!(ranked
        .iter()
        .all(|r| r["pcc"].as_f64().unwrap().abs() <= 1.0));
}

#[test]
fn forecast_honors_feature_presets() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    let mut args = vec![
        "forecast",
        "--input",
        dataset.to_str().unwrap(),
        "--features.trend_preset",
        "month_sin,month_cos,avg_temp,off_days",
        "--features.random_preset",
        "avg_temp,off_days",
    ];
    args.extend(small_model_flags());
    run_ok(dir.path(), &args);
    let diagnostics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(
        diagnostics["trend"]["selection"]["selected"],
        serde_json::json!(["month_sin", "month_cos", "avg_temp", "off_days"])
    );
    assert_eq!(
        diagnostics["random"]["selection"]["selected"],
        serde_json::json!(["avg_temp", "off_days"])
    );
}

#[test]
fn evaluate_reproduces_reference_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/table1_d1.csv");
    run_ok(
        dir.path(),
        &[
            "evaluate",
            "--fixtures",
            fixture.to_str().unwrap(),
            "--reference",
            "ECLF",
        ],
    );
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let f_rank_line = csv.lines().find(|l| l.starts_with("f_rank")).unwrap();
    assert!(f_rank_line.ends_with("4.167"), "line was {f_rank_line}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["win_loss"]["ECLF"][0], 94);
    assert_eq!(report["win_loss"]["ECLF"][1], 38);
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    let cfg_path = dir.path().join("run.cfg");
    fs::write(&cfg_path, "[stl]\ntrend_window = 25\n[run]\nseed = 7\n").unwrap();

    run_ok(
        dir.path(),
        &[
            "decompose",
            "--input",
            dataset.to_str().unwrap(),
            "--config",
            cfg_path.to_str().unwrap(),
            "--stl.trend_window",
            "27",
        ],
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("decompose_manifest.json")).unwrap(),
    )
    .unwrap();
    // flag beats file, file beats default
    assert_eq!(manifest["config"]["stl.trend_window"], "27");
    assert_eq!(manifest["config"]["run.seed"], "7");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn failures_exit_nonzero_with_parseable_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["forecast", "--input", "missing.csv"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.trim().lines().collect();
    assert_eq!(lines.len(), 1, "stderr was {stderr:?}");
    let parsed: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(parsed["error"].as_str().unwrap().contains("missing.csv"));

    // unknown config key is rejected, not ignored
    let cfg_path = dir.path().join("bad.cfg");
    fs::write(&cfg_path, "[stl]\nnot_a_key = 1\n").unwrap();
    let dataset = synth_dataset(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "decompose",
            "--input",
            dataset.to_str().unwrap(),
            "--config",
            cfg_path.to_str().unwrap(),
        ],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("not_a_key"), "stderr was {stderr:?}");
}
