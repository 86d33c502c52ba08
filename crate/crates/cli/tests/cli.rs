use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_deconfound"));
    cmd.env_remove("DECONFOUND_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small simulated train/test pair.
fn simulate(dir: &Path, seed: &str) -> PathBuf {
    ok(&["--out-dir", s(dir), "--seed", seed, "simulate", "--p", "12", "--n", "300"]);
    dir.to_path_buf()
}

#[test]
fn default_simulate_manifest_echoes_model_settings() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out-dir", s(dir.path()), "simulate", "--n", "50"]);
    let manifest = json(&dir.path().join("sim_manifest.json"));
    let sim = &manifest["config"]["sim"];
    assert_eq!(sim["d"], 20);
    assert_eq!(sim["p"], 300);
    assert_eq!(sim["sigma"], 2.0);
    assert_eq!(sim["k"], 2);
    assert_eq!(sim["concentration"], serde_json::json!([40.0, 50.0]));
    assert_eq!(manifest["config"]["train_size"], 50);
    let alpha: Vec<f64> = serde_json::from_value(manifest["config"]["alpha"].clone()).unwrap();
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 8);
    for name in ["sim_train_x.csv", "sim_train_covariates.csv", "sim_test_x.csv", "sim_test_covariates.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn zero_samples_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out-dir", s(dir.path()), "simulate", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_same_hashes() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let hashes = |dir: &Path| -> Vec<Value> {
        json(&dir.join("sim_manifest.json"))["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["sha256"].clone())
            .collect()
    };
    simulate(a.path(), "5");
    simulate(b.path(), "5");
    simulate(c.path(), "6");
    assert_eq!(hashes(a.path()), hashes(b.path()));
    assert_ne!(hashes(a.path()), hashes(c.path()));
}

#[test]
fn fit_transform_verify_and_captured_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let d = simulate(dir.path(), "1");
    let x = d.join("sim_train_x.csv");
    let cov = d.join("sim_train_covariates.csv");
    let stdout = ok(&["--out-dir", s(&d), "onion-fit", "--x", s(&x), "--covariates", s(&cov)]);
    assert!(stdout.contains("m = 1"), "{stdout}");
    let basis = json(&d.join("basis.json"));
    assert_eq!(basis["m"], 1);
    assert_eq!(basis["p"], 12);

    // Direct computation: ‖X_cᵀ (Y − ȳ)‖² on the centered training matrix.
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&x)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let y: Vec<f64> = std::fs::read_to_string(&cov)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let n = rows.len() as f64;
    let p = rows[0].len();
    let y_mean = y.iter().sum::<f64>() / n;
    let mut cross = vec![0.0; p];
    for j in 0..p {
        let col_mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        cross[j] = rows.iter().zip(&y).map(|(r, yi)| (r[j] - col_mean) * (yi - y_mean)).sum();
    }
    let expected: f64 = cross.iter().map(|c| c * c).sum();
    let captured = basis["fit_report"]["captured_covariance"][0].as_f64().unwrap();
    assert!((captured - expected).abs() < 1e-9 * expected, "{captured} vs {expected}");

    let stdout = ok(&[
        "--out-dir",
        s(&d),
        "onion-transform",
        "--x",
        s(&d.join("sim_test_x.csv")),
        "--basis",
        s(&d.join("basis.json")),
        "--verify",
    ]);
    assert!(stdout.starts_with("verified"), "{stdout}");
    assert!(d.join("transformed.csv").exists());
    assert!(d.join("transformed_manifest.json").exists());
}

#[test]
fn transform_with_wrong_width_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = simulate(dir.path(), "2");
    ok(&[
        "--out-dir",
        s(&d),
        "onion-fit",
        "--x",
        s(&d.join("sim_train_x.csv")),
        "--covariates",
        s(&d.join("sim_train_covariates.csv")),
    ]);
    let narrow = d.join("narrow.csv");
    std::fs::write(&narrow, "1,2,3\n4,5,6\n").unwrap();
    let out = run(&["--out-dir", s(&d), "onion-transform", "--x", s(&narrow), "--basis", s(&d.join("basis.json"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = simulate(dir.path(), "3");
    let config = d.join("train.json");
    std::fs::write(&config, r#"{"iterations": 300, "hidden_units": 5}"#).unwrap();
    for method in ["logreg", "logreg-onion", "mlp", "dann", "logreg-ancova"] {
        let model = format!("{method}.json");
        ok(&[
            "--out-dir",
            s(&d),
            "train",
            "--method",
            method,
            "--x",
            s(&d.join("sim_train_x.csv")),
            "--covariates",
            s(&d.join("sim_train_covariates.csv")),
            "--config",
            s(&config),
            "--output",
            &model,
        ]);
        let stdout = ok(&[
            "--out-dir",
            s(&d),
            "evaluate",
            "--model",
            s(&d.join(&model)),
            "--x",
            s(&d.join("sim_test_x.csv")),
            "--covariates",
            s(&d.join("sim_test_covariates.csv")),
            "--train-covariates",
            s(&d.join("sim_train_covariates.csv")),
            "--group-column",
            "Y1",
            "--output",
            &format!("{method}_scores.csv"),
        ]);
        let metrics: Value = serde_json::from_str(&stdout).unwrap();
        let auc = metrics["auc_entire"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc), "{method}: {stdout}");
        assert!(metrics["auc_confounded"].as_f64().is_some());
        let scores = std::fs::read_to_string(d.join(format!("{method}_scores.csv"))).unwrap();
        assert_eq!(scores.lines().next(), Some("score,label"));
    }
}

#[test]
fn missing_data_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere").join("x.csv");
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "name": "files",
            "data": {"files": {"matrix": missing, "covariates": dir.path().join("cov.csv")}},
            "methods": [{"method": "logreg"}]
        })
        .to_string(),
    )
    .unwrap();
    let out = run(&["--out-dir", s(dir.path()), "experiment", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(s(&missing)), "{stderr}");
}

#[test]
fn config_errors_report_json_paths() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{"data": {"simulate": {"sim": {"sigma": "two"}}}, "methods": [{"method": "logreg"}]}"#,
    )
    .unwrap();
    let out = run(&["--out-dir", s(dir.path()), "experiment", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("data.simulate.sim.sigma"), "{stderr}");

    std::fs::write(&config, r#"{"data": {"cohort": {}}, "methods": [{"method": "svm"}]}"#).unwrap();
    let out = run(&["--out-dir", s(dir.path()), "experiment", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("methods[0].method"));
}

fn small_table_config(dir: &Path) -> PathBuf {
    let mut config: Value = serde_json::from_str(include_str!("../configs/table1_style.json")).unwrap();
    config["data"]["cohort"]["cohort"]["n"] = 200.into();
    config["data"]["cohort"]["cohort"]["noise_features"] = 4.into();
    config["fold_count"] = 3.into();
    for m in config["methods"].as_array_mut().unwrap() {
        m["train"] = serde_json::json!({"iterations": 100, "hidden_units": 4, "checkpoint_every": 50});
    }
    let path = dir.join("small.json");
    std::fs::write(&path, config.to_string()).unwrap();
    path
}

#[test]
fn table_layout_and_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_table_config(dir.path());
    let stdout = ok(&["--out-dir", s(dir.path()), "experiment", "--config", s(&config), "--name", "t1"]);
    let header = stdout.lines().find(|l| l.contains("entire")).expect("header row");
    assert!(header.contains("confounded"));
    for row in ["logreg ", "logreg+ONION", "MLP", "DANN"] {
        assert!(stdout.lines().any(|l| l.starts_with(row)), "missing {row}:\n{stdout}");
    }
    let csv = std::fs::read_to_string(dir.path().join("t1_report.csv")).unwrap();
    let columns: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(&columns[..5], ["method", "trial", "fold", "test_set_kind", "auc"]);
    let kinds: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(kinds.into_iter().collect::<Vec<_>>(), ["confounded", "entire"]);
    let report = json(&dir.path().join("t1_report.json"));
    assert_eq!(report["cells"].as_array().unwrap().len(), 4 * 3);
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = simulate(dir.path(), "4");
    let (x, cov) = (d.join("sim_train_x.csv"), d.join("sim_train_covariates.csv"));
    let args = [
        "--out-dir",
        s(&d),
        "--seed",
        "9",
        "onion-fit",
        "--x",
        s(&x),
        "--covariates",
        s(&cov),
    ];
    ok(&args);
    let manifest = json(&d.join("basis_manifest.json"));
    let first = manifest["outputs"][0]["sha256"].clone();
    std::fs::remove_file(d.join("basis.json")).unwrap();
    let argv: Vec<String> = serde_json::from_value(manifest["argv"].clone()).unwrap();
    let replay = bin().args(&argv[1..]).output().unwrap();
    assert!(replay.status.success());
    assert_eq!(json(&d.join("basis_manifest.json"))["outputs"][0]["sha256"], first);
    assert_eq!(manifest["config"]["onion"]["seed"], 9);
}

#[test]
fn bundled_configs_parse_and_validate() {
    for text in [include_str!("../configs/figure1.json"), include_str!("../configs/table1_style.json")] {
        let config: deconfound::eval::ExperimentConfig = serde_json::from_str(text).unwrap();
        config.validate().unwrap();
    }
    let out = run(&["experiment", "--config", "no_such_config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}
