//! Stability of the experiment harness: named random streams make every
//! grid cell self-contained, so results must survive regrouping the grid,
//! and everything written to disk must reproduce bit for bit.

use std::fs;

use reshuffle::estimate::EstimatorKind;
use reshuffle::experiment::{
    oracle_check, run_experiment, run_sv_loss, ExperimentConfig, ExperimentKind, LossName,
    ResultRow, KL_ORACLE_TOLERANCE, TV_ORACLE_TOLERANCE,
};
use reshuffle::select::SelectionScheme;

fn tiny_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::new(ExperimentKind::SvLoss);
    config.seed = 42;
    config.replicates = 3;
    config.particle_counts = vec![16];
    config.step_counts = vec![12];
    config.schemes = vec![SelectionScheme::KL_W];
    config.estimators = vec![EstimatorKind::Mmse, EstimatorKind::Sampled];
    config.losses = vec![LossName::Squared];
    config
}

fn cell_key(row: &ResultRow) -> (String, String, usize, usize, usize, String, String) {
    (
        row.experiment.clone(),
        row.scheme.name().to_string(),
        row.particles,
        row.steps,
        row.replicate,
        row.estimator.name().to_string(),
        row.loss.name().to_string(),
    )
}

fn values_for(rows: &[ResultRow], scheme: SelectionScheme) -> Vec<(f64, String)> {
    let mut keyed: Vec<(String, f64)> = rows
        .iter()
        .filter(|row| row.scheme == scheme)
        .map(|row| (format!("{:?}", cell_key(row)), row.value))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(key, value)| (value, key)).collect()
}

#[test]
fn a_scheme_sees_identical_results_alone_or_in_company() {
    let alone = run_sv_loss(&tiny_config()).expect("single-scheme grid runs");
    let mut crowded_config = tiny_config();
    crowded_config.schemes = vec![
        SelectionScheme::SYSTEMATIC,
        SelectionScheme::KL_W,
        SelectionScheme::TV_P,
    ];
    let crowded = run_sv_loss(&crowded_config).expect("multi-scheme grid runs");
    assert_eq!(
        values_for(&alone, SelectionScheme::KL_W),
        values_for(&crowded, SelectionScheme::KL_W),
        "adding schemes to the grid changed an existing scheme's results"
    );
}

#[test]
fn extending_the_grid_leaves_existing_cells_untouched() {
    let small = run_sv_loss(&tiny_config()).expect("base grid runs");

    let mut more_particles = tiny_config();
    more_particles.particle_counts = vec![16, 24];
    let widened = run_sv_loss(&more_particles).expect("widened grid runs");
    let only_16: Vec<ResultRow> = widened
        .into_iter()
        .filter(|row| row.particles == 16)
        .collect();
    assert_eq!(
        values_for(&small, SelectionScheme::KL_W),
        values_for(&only_16, SelectionScheme::KL_W),
        "adding a particle count changed the original cells"
    );

    let mut more_replicates = tiny_config();
    more_replicates.replicates = 5;
    let lengthened = run_sv_loss(&more_replicates).expect("lengthened grid runs");
    let early: Vec<ResultRow> = lengthened
        .into_iter()
        .filter(|row| row.replicate < 3)
        .collect();
    assert_eq!(
        values_for(&small, SelectionScheme::KL_W),
        values_for(&early, SelectionScheme::KL_W),
        "raising the replicate count changed the original replicates"
    );
}

#[test]
fn written_tables_reproduce_across_directories() {
    let first_dir = tempfile::tempdir().expect("tempdir");
    let second_dir = tempfile::tempdir().expect("tempdir");
    let mut first_config = tiny_config();
    first_config.output_dir = first_dir.path().to_path_buf();
    let mut second_config = tiny_config();
    second_config.output_dir = second_dir.path().to_path_buf();

    let first_paths = run_experiment(&first_config).expect("first run writes");
    let second_paths = run_experiment(&second_config).expect("second run writes");
    let names: Vec<_> = first_paths
        .iter()
        .filter_map(|path| path.file_name())
        .collect();
    assert!(names.contains(&"results.csv".as_ref()));
    assert!(names.contains(&"manifest.json".as_ref()));
    assert_eq!(first_paths.len(), second_paths.len());

    let first_csv = fs::read(first_dir.path().join("results.csv")).expect("results readable");
    let second_csv = fs::read(second_dir.path().join("results.csv")).expect("results readable");
    assert_eq!(first_csv, second_csv, "same config, different bytes");
}

#[test]
fn csv_values_round_trip_at_full_precision() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut config = tiny_config();
    config.output_dir = dir.path().to_path_buf();
    let rows = run_sv_loss(&config).expect("grid runs");
    run_experiment(&config).expect("tables written");

    let mut reader = csv::Reader::from_path(dir.path().join("results.csv")).expect("csv opens");
    let mut parsed = Vec::new();
    for record in reader.records() {
        let record = record.expect("record parses");
        let value: f64 = record
            .get(record.len() - 1)
            .expect("value column present")
            .parse()
            .expect("value parses");
        parsed.push(value);
    }
    assert_eq!(parsed.len(), rows.len());
    let mut expected: Vec<f64> = rows.iter().map(|row| row.value).collect();
    expected.sort_by(f64::total_cmp);
    parsed.sort_by(f64::total_cmp);
    for (left, right) in expected.iter().zip(&parsed) {
        assert_eq!(
            left.to_bits(),
            right.to_bits(),
            "value lost precision through the CSV: {left} vs {right}"
        );
    }
}

#[test]
fn oracle_check_reports_its_protocol_and_passes() {
    let report = oracle_check(6, 200, 1).expect("oracle comparison runs");
    assert_eq!(report.cases, 200);
    assert_eq!(report.max_offspring, 6);
    assert!(report.passed());
    assert!(report.max_kl_gap <= KL_ORACLE_TOLERANCE);
    assert!(report.max_tv_gap <= TV_ORACLE_TOLERANCE);
    assert!(report.tv_counts_bracketed);
}
