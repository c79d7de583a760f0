use std::path::{Path, PathBuf};
use std::process::Command;

use qgsa_bench::config::RunConfig;
use qgsa_bench::report::{mean, median, read_trace, sample_std, trace_file_name, RunSummary};
use qgsa_bench::{compare, train, train_config, SUMMARY_FILE};

fn data_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}

fn iris_config(name: &str, method: &str, iterations: usize, seeds: &[u64]) -> RunConfig {
    serde_json::from_value(serde_json::json!({
        "name": name,
        "dataset": {"kind": "iris", "path": data_dir().join("iris.csv"), "classes": ["setosa", "versicolor"]},
        "layers": 1,
        "loss": "qh",
        "optimizer": {"method": method},
        "iterations": iterations,
        "seeds": seeds,
        "init_seed": 3,
    }))
    .unwrap()
}

fn write_config(dir: &Path, config: &RunConfig) -> PathBuf {
    let path = dir.join(format!("{}.json", config.name));
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

#[test]
fn zero_iterations_give_single_record_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = iris_config("t0", "qgsa_practical", 0, &[4, 5]);
    let summary = train_config(&config, Path::new("."), dir.path(), false).unwrap();
    assert_eq!(summary.total_circuits, 0);
    for seed in [4, 5] {
        let rows = read_trace(&dir.path().join(trace_file_name(seed))).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t, 0);
    }
}

#[test]
fn ledger_columns_follow_circuit_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let n = 100u64;
    let k = 4u64;
    for method in ["gd", "qgsa_practical"] {
        let config = iris_config(method, method, 8, &[0, 1]);
        let out = dir.path().join(method);
        let summary = train_config(&config, Path::new("."), &out, false).unwrap();
        assert_eq!(summary.n_params as u64, k);
        for seed in [0, 1] {
            for row in read_trace(&out.join(trace_file_name(seed))).unwrap() {
                let t = row.t as u64;
                if method == "gd" {
                    assert_eq!(row.circuits, 2 * k * n * t);
                } else {
                    assert!(row.circuits <= 3 * n * t);
                }
            }
        }
    }
}

#[test]
fn summary_agrees_with_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = iris_config("summary", "spsa", 12, &[0, 1, 2]);
    let summary = train_config(&config, Path::new("."), dir.path(), false).unwrap();
    let on_disk = RunSummary::read(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary, on_disk);

    let mut finals = Vec::new();
    let mut circuits = 0;
    let mut shots = 0;
    let mut cost = 0.0;
    for run in &summary.runs {
        let rows = read_trace(&dir.path().join(trace_file_name(run.seed))).unwrap();
        let last = rows.last().unwrap();
        finals.push(last.loss);
        circuits += last.circuits;
        shots += last.shots;
        cost += last.cost;
    }
    assert!((mean(&finals) - summary.final_loss_mean).abs() <= 1e-12);
    assert!((sample_std(&finals) - summary.final_loss_std).abs() <= 1e-12);
    assert!((median(&finals) - summary.final_loss_median).abs() <= 1e-12);
    assert_eq!(circuits, summary.total_circuits);
    assert_eq!(shots, summary.total_shots);
    assert!((cost - summary.total_cost).abs() <= 1e-12 * cost.max(1.0));
}

#[test]
fn relative_dataset_paths_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data_dir().join("iris.csv"), dir.path().join("iris.csv")).unwrap();
    let mut config = iris_config("relative", "rcd", 2, &[0]);
    config.dataset = serde_json::from_str(r#"{"kind": "iris", "path": "iris.csv"}"#).unwrap();
    let path = write_config(dir.path(), &config);
    let summary = train(&path, Some(&dir.path().join("out")), true).unwrap();
    assert_eq!(summary.n_examples, 100);
    assert!(dir.path().join("out/loss_vs_iter.svg").is_file());
    assert!(dir.path().join("out/loss_vs_circuits.svg").is_file());
}

#[test]
fn compare_needs_two_runs_and_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let gd = iris_config("gd", "gd", 5, &[0, 1]);
    train_config(&gd, Path::new("."), &dir.path().join("gd"), false).unwrap();
    assert!(compare(dir.path()).is_err());

    let qgsa = iris_config("qgsa", "qgsa_practical", 5, &[0, 1]);
    train_config(&qgsa, Path::new("."), &dir.path().join("qgsa"), false).unwrap();
    let report = compare(dir.path()).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.plots.len(), 1);
    assert!(report.plots[0].is_file());
    let gd_row = report.rows.iter().find(|r| r.optimizer == "gd").unwrap();
    assert_eq!(gd_row.circuit_ratio_vs_gd, Some(1.0));
    let q_row = report
        .rows
        .iter()
        .find(|r| r.optimizer == "qgsa_practical")
        .unwrap();
    let ratio = q_row.circuit_ratio_vs_gd.unwrap();
    // 2k = 8 circuits per example for GD against 2 or 3 for gradient sampling
    assert!((2.0 / 8.0..=3.0 / 8.0).contains(&ratio), "{ratio}");
    let table = report.render();
    assert!(table.contains("IonQ - Aria (USD)"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn binary_reports_errors_with_nonzero_status() {
    let bin = env!("CARGO_BIN_EXE_qgsa");
    let out = Command::new(bin)
        .args(["shots", "--epsilon", "0.01", "--delta", "0.05"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("18445"));

    let out = Command::new(bin)
        .args(["shots", "--gap", "0.1", "--delta", "1.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));

    let out = Command::new(bin)
        .args(["train", "--config", "/definitely/missing.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["compare", "--runs"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_parse() {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"));
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let config = RunConfig::from_path(&path).unwrap();
            config.dataset.load(&dir).unwrap();
            count += 1;
        }
    }
    assert!(count >= 5);
}
