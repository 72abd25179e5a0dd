use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clad::eval::EvaluationReport;
use clad::pipeline::ExperimentConfig;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn clad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clad")).args(args).output().unwrap()
}

fn quick_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(repo_file("configs/synthetic.toml"))
        .unwrap()
        .replace("epochs = 100", "epochs = 10");
    let path = dir.join("quick.toml");
    fs::write(&path, format!("{text}\n[clustering.refine]\nepochs = 5\n")).unwrap();
    path
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_and_report_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = repo_file("configs/synthetic.toml");
    let o = clad(&["run", "--config", path_arg(&config), "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("AUROC"), "{stdout}");
    let report = EvaluationReport::load(&out.join("report.json")).unwrap();
    assert!(report.auroc >= 0.9, "{}", report.auroc);

    let o = clad(&["report", "--out", path_arg(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("{:.4}", report.auroc)));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = quick_config(dir.path());
    let o = clad(&[
        "run",
        "--config",
        path_arg(&config),
        "--out",
        path_arg(&out),
        "--clusters",
        "4",
        "--seed",
        "11",
        "--temperature",
        "10",
        "--epsilon",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let saved = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(saved.seed, 11);
    assert_eq!(saved.clustering.clusters, 4);
    assert_eq!(saved.detector.temperature, 10.0);
    assert_eq!(saved.detector.epsilon, 0.0);
    // Values not given on the command line come from the file.
    assert_eq!(saved.autoencoder.hidden_dim, 2);
    assert_eq!(saved.autoencoder.epochs, 10);
}

#[test]
fn stage_without_upstream_artifact_exits_with_stage_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let o = clad(&[
        "stage",
        "cluster",
        "--config",
        path_arg(&config),
        "--out",
        path_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(5));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("cluster") && stderr.contains("autoencoder.json"),
        "{stderr}"
    );
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    for stage in ["extract", "cluster", "classify", "score", "evaluate"] {
        let o = clad(&[
            "stage",
            stage,
            "--config",
            path_arg(&config),
            "--out",
            path_arg(dir.path()),
        ]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[clustering]\nclusters = 1\n").unwrap();
    let o = clad(&["run", "--config", path_arg(&bad), "--out", path_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));

    let o = clad(&["run", "--temperature", "0", "--out", path_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&bad, "seed = \"zero\"\n").unwrap();
    let o = clad(&["run", "--config", path_arg(&bad), "--out", path_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mnist.toml");
    fs::write(
        &cfg,
        "[scenario]\nkind = \"mnist\"\ndata_dir = \"/nonexistent/mnist\"\n",
    )
    .unwrap();
    let o = clad(&["run", "--config", path_arg(&cfg), "--out", path_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_report_exits_with_code_ten() {
    let dir = tempfile::tempdir().unwrap();
    let o = clad(&["report", "--out", path_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(10));
}

#[test]
fn ablate_with_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let grid = dir.path().join("grid.toml");
    fs::write(&grid, "settings = [[2, 2], [3, 2]]\n").unwrap();
    let out = dir.path().join("abl");
    let o = clad(&[
        "ablate",
        "--config",
        path_arg(&config),
        "--grid",
        path_arg(&grid),
        "--out",
        path_arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
}
