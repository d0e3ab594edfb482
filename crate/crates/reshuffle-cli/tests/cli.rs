//! End-to-end checks of the command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn reshuffle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reshuffle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path
}

const TINY_SV: &str = r#"
experiment = "sv_loss"
seed = 5
replicates = 2
particle_counts = [16]
step_counts = [10]
schemes = ["kl_w", "systematic"]
estimators = ["mmse"]
losses = ["l2"]
"#;

#[test]
fn run_writes_tables_and_lists_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_SV);
    let out_dir = dir.path().join("out");
    let output = reshuffle(&[
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("results.csv"), "{stdout}");
    assert!(stdout.contains("manifest.json"), "{stdout}");
    assert!(out_dir.join("results.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn reruns_are_byte_identical_and_seed_overrides_bite() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_SV);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let reseeded = dir.path().join("reseeded");

    for out in [&first, &second] {
        let output = reshuffle(&[
            "run",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    let output = reshuffle(&[
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        reseeded.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(output.status.success());

    let bytes_first = fs::read(first.join("results.csv")).unwrap();
    let bytes_second = fs::read(second.join("results.csv")).unwrap();
    let bytes_reseeded = fs::read(reseeded.join("results.csv")).unwrap();
    assert_eq!(bytes_first, bytes_second, "same seed, same bytes");
    assert_ne!(bytes_first, bytes_reseeded, "the seed override must bite");
}

#[test]
fn validate_summarizes_good_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_SV);
    let output = reshuffle(&["validate", config.to_str().unwrap()]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("ok: sv_loss"), "{stdout}");
    assert!(stdout.contains("kl_w systematic"), "{stdout}");
}

#[test]
fn validate_names_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "experiment = \"sv_loss\"\nparicles = [16]\n");
    let output = reshuffle(&["validate", config.to_str().unwrap()]);
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("paricles"), "{stderr}");
}

#[test]
fn run_reports_missing_config_files() {
    let output = reshuffle(&["run", "/nonexistent/experiment.toml"]);
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("experiment.toml"), "{stderr}");
}

#[test]
fn oracle_check_passes_at_small_sizes() {
    let output = reshuffle(&["oracle-check", "--max-s", "5", "--cases", "50", "--seed", "3"]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("oracle check passed"), "{stdout}");
    assert!(stdout.contains("kl objective gap"), "{stdout}");
}

#[test]
fn degeneracy_runs_write_all_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
experiment = "degeneracy"
seed = 2
replicates = 1
particle_counts = [8]
step_counts = [6]
schemes = ["ml", "stratified"]
"#,
    );
    let out_dir = dir.path().join("out");
    let output = reshuffle(&[
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    for name in ["edges.csv", "survivors.csv", "distinct.csv", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn pg_runs_write_chain_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
experiment = "pg_synthetic"
seed = 4
replicates = 1
particle_counts = [4]
step_counts = [12]
schemes = ["kl_w"]

[pg]
iterations = 5
max_lag = 2
"#,
    );
    let out_dir = dir.path().join("out");
    let output = reshuffle(&[
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    for name in ["chains.csv", "estimates.csv", "acf.csv", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    assert!(
        !out_dir.join("trajectories.csv").exists(),
        "no trajectories without a stride"
    );
}

#[test]
fn shipped_example_configs_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut checked = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let output = reshuffle(&["validate", path.to_str().unwrap()]);
        assert!(
            output.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&output.stderr)
        );
        checked += 1;
    }
    assert!(checked >= 5, "expected the example configs, found {checked}");
}
