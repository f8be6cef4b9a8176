use std::path::Path;
use std::process::{Command, Output};

use hdrisk::data::{gen_dataset, replication_rng, NoiseSpec};
use hdrisk::harness::CSV_HEADER;
use hdrisk::io::save_dataset;
use hdrisk::linalg::Covariance;
use nalgebra::DVector;

fn hdrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdrisk"))
        .args(args)
        .env_remove("HDRISK_THREADS")
        .output()
        .expect("binary runs")
}

fn small_experiment(dir: &Path) -> std::path::PathBuf {
    let cfg = r#"{
        "experiment": "huber_grid",
        "n": 40, "p": 30, "reps": 3, "master_seed": 11,
        "lambdas": [0.05, 0.1, 0.2, 0.4],
        "lambda_stars": [0.1, 0.3, 0.9],
        "noise": {"kind": "student_t", "dof": 2},
        "signal": {"kind": "sparse_flat", "s": 4, "amplitude": 1.0},
        "record_wall_time": false
    }"#;
    let path = dir.join("exp.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn experiment_writes_the_documented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_experiment(dir.path());
    let out = dir.path().join("rows.csv");
    let run = hdrisk(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 3 * 12);
    assert!(!text.contains('\r'));
}

#[test]
fn thread_count_does_not_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_experiment(dir.path());
    let csv = |threads: &str| {
        let run = hdrisk(&["experiment", "--config", cfg.to_str().unwrap(), "--threads", threads]);
        assert!(run.status.success());
        run.stdout
    };
    assert_eq!(csv("1"), csv("3"));
}

#[test]
fn invalid_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"experiment": "ols_calibration", "n": 50, "p": 10, "reps": 0,
            "noise": {"kind": "gaussian", "sigma": 1.0}, "signal": {"kind": "sparse_flat", "s": 2, "amplitude": 1.0}}"#).unwrap();
    let run = hdrisk(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("reps"));

    let missing = hdrisk(&["experiment", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(hdrisk(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let run = hdrisk(&["selftest"]);
    assert!(run.status.success());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 7, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn fit_and_estimate_on_a_saved_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = replication_rng(3, 0);
    let beta = DVector::from_fn(20, |j, _| if j < 3 { 1.0 } else { 0.0 });
    let (data, _) = gen_dataset(50, &Covariance::identity(20), &beta, NoiseSpec::Gaussian { sigma: 1.0 }, &mut rng)
        .unwrap();
    let data_path = dir.path().join("data.csv");
    save_dataset(&data, &data_path).unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(
        &model,
        r#"{"loss": {"kind": "square"}, "penalty": {"kind": "l1", "lambda": 0.1}, "sigma2": 1.0}"#,
    )
    .unwrap();
    let (d, m) = (data_path.to_str().unwrap(), model.to_str().unwrap());

    let fit = hdrisk(&["fit", "--data", d, "--config", m]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(summary["beta_hat"].as_array().unwrap().len(), 20);

    let est = hdrisk(&["estimate", "--data", d, "--config", m]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let out: serde_json::Value = serde_json::from_slice(&est.stdout).unwrap();
    let report = &out["report"];
    assert!(report["r_hat"].as_f64().unwrap().is_finite());
    assert!(report["sure"].as_f64().is_some());
    let active = out["fit"]["active_set"].as_array().unwrap().len() as f64;
    assert_eq!(report["factors"]["df_hat"].as_f64().unwrap(), active);
}
