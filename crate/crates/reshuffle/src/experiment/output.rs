//! Result tables, CSV encoding, and the run manifest.
//!
//! Every writer produces byte-identical files for identical inputs: rows
//! arrive pre-sorted from the runners, floats are printed with 17
//! significant digits, and no timestamps or environment details leak into
//! the output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::EstimatorKind;
use crate::select::SelectionScheme;

use super::config::{ExperimentConfig, LossName};

/// Formats a float in scientific notation with 17 significant digits, the
/// precision needed to round-trip any finite `f64`.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// FNV-1a over the raw bits of a float sequence.
///
/// The runners hash each cell's observation sequence and assert that every
/// scheme sharing a (step count, replicate) pair consumed identical data.
pub fn hash_bits(values: &[f64]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for value in values {
        for byte in value.to_bits().to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

/// One loss measurement, locating a grid cell and its scored value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Experiment identifier; the non-linear runs append their variance
    /// pair, e.g. `nl_loss[10:10]`.
    pub experiment: String,
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub steps: usize,
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub loss: LossName,
    pub value: f64,
}

impl ResultRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: String,
        scheme: SelectionScheme,
        particles: usize,
        steps: usize,
        replicate: usize,
        estimator: EstimatorKind,
        loss: LossName,
        value: f64,
    ) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid(
                "value",
                format!("loss must be finite, got {value}"),
            ));
        }
        Ok(ResultRow {
            experiment,
            scheme,
            particles,
            steps,
            replicate,
            estimator,
            loss,
            value,
        })
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.scheme.name().to_string(),
            self.particles.to_string(),
            self.steps.to_string(),
            self.replicate.to_string(),
            self.estimator.name().to_string(),
            self.loss.name().to_string(),
            format_float(self.value),
        ]
    }
}

/// One per-step estimate next to the true state, for state-trace dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub experiment: String,
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub steps: usize,
    pub replicate: usize,
    /// One-based time index.
    pub step: usize,
    pub truth: f64,
    pub estimate: f64,
}

/// One propagation edge: particle `child` at `step` descends from `parent`
/// at the previous step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub replicate: usize,
    /// One-based time index, starting at 2.
    pub step: usize,
    pub child: usize,
    pub parent: usize,
}

/// One step of the ancestor path behind a final particle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivorRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub replicate: usize,
    /// Final-generation particle whose lineage this row belongs to.
    pub leaf: usize,
    /// One-based time index.
    pub step: usize,
    /// Particle index occupied by the lineage at `step`.
    pub ancestor: usize,
}

/// Number of distinct time-1 ancestors still represented at a step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistinctRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub replicate: usize,
    /// One-based time index.
    pub step: usize,
    pub roots: usize,
}

/// Everything a degeneracy run emits.
#[derive(Debug, Clone, Default)]
pub struct DegeneracyDump {
    pub edges: Vec<EdgeRow>,
    pub survivors: Vec<SurvivorRow>,
    pub distinct: Vec<DistinctRow>,
}

/// One Gibbs iteration's parameter draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub steps: usize,
    pub replicate: usize,
    /// One-based chain position; 1 is the initialization.
    pub iteration: usize,
    pub sigma2: f64,
    pub beta2: f64,
    pub phi: f64,
}

/// One summarized parameter of a finished chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PgEstimateRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub steps: usize,
    pub replicate: usize,
    /// `sigma2`, `beta2`, or `phi` for trailing-window medians; `sigma` and
    /// `beta` are the square roots of the variance medians.
    pub parameter: &'static str,
    pub value: f64,
}

/// One autocorrelation value of a post-burn-in parameter chain.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub steps: usize,
    pub replicate: usize,
    pub parameter: &'static str,
    pub lag: usize,
    pub value: f64,
}

/// One state of a retained reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub scheme: SelectionScheme,
    pub particles: usize,
    pub steps: usize,
    pub replicate: usize,
    /// Chain position the trajectory was recorded at.
    pub iteration: usize,
    /// One-based time index.
    pub step: usize,
    pub state: f64,
}

/// Everything a particle Gibbs run emits.
#[derive(Debug, Clone, Default)]
pub struct PgDump {
    pub chains: Vec<ChainRow>,
    pub estimates: Vec<PgEstimateRow>,
    pub acfs: Vec<AcfRow>,
    pub trajectories: Vec<TrajectoryRow>,
}

fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub(crate) fn write_results(dir: &Path, rows: &[ResultRow]) -> Result<PathBuf> {
    let path = dir.join("results.csv");
    write_table(
        &path,
        &[
            "experiment",
            "scheme",
            "particles",
            "steps",
            "replicate",
            "estimator",
            "loss",
            "value",
        ],
        rows.iter().map(ResultRow::record),
    )?;
    Ok(path)
}

pub(crate) fn write_states(dir: &Path, rows: &[StateRow]) -> Result<PathBuf> {
    let path = dir.join("states.csv");
    write_table(
        &path,
        &[
            "experiment",
            "scheme",
            "particles",
            "steps",
            "replicate",
            "step",
            "truth",
            "estimate",
        ],
        rows.iter().map(|row| {
            vec![
                row.experiment.clone(),
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.steps.to_string(),
                row.replicate.to_string(),
                row.step.to_string(),
                format_float(row.truth),
                format_float(row.estimate),
            ]
        }),
    )?;
    Ok(path)
}

pub(crate) fn write_degeneracy(dir: &Path, dump: &DegeneracyDump) -> Result<Vec<PathBuf>> {
    let edges = dir.join("edges.csv");
    write_table(
        &edges,
        &["scheme", "particles", "replicate", "step", "child", "parent"],
        dump.edges.iter().map(|row| {
            vec![
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.replicate.to_string(),
                row.step.to_string(),
                row.child.to_string(),
                row.parent.to_string(),
            ]
        }),
    )?;

    let survivors = dir.join("survivors.csv");
    write_table(
        &survivors,
        &["scheme", "particles", "replicate", "leaf", "step", "ancestor"],
        dump.survivors.iter().map(|row| {
            vec![
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.replicate.to_string(),
                row.leaf.to_string(),
                row.step.to_string(),
                row.ancestor.to_string(),
            ]
        }),
    )?;

    let distinct = dir.join("distinct.csv");
    write_table(
        &distinct,
        &["scheme", "particles", "replicate", "step", "roots"],
        dump.distinct.iter().map(|row| {
            vec![
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.replicate.to_string(),
                row.step.to_string(),
                row.roots.to_string(),
            ]
        }),
    )?;

    Ok(vec![edges, survivors, distinct])
}

pub(crate) fn write_pg(dir: &Path, dump: &PgDump) -> Result<Vec<PathBuf>> {
    let chains = dir.join("chains.csv");
    write_table(
        &chains,
        &[
            "scheme",
            "particles",
            "steps",
            "replicate",
            "iteration",
            "sigma2",
            "beta2",
            "phi",
        ],
        dump.chains.iter().map(|row| {
            vec![
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.steps.to_string(),
                row.replicate.to_string(),
                row.iteration.to_string(),
                format_float(row.sigma2),
                format_float(row.beta2),
                format_float(row.phi),
            ]
        }),
    )?;

    let estimates = dir.join("estimates.csv");
    write_table(
        &estimates,
        &["scheme", "particles", "steps", "replicate", "parameter", "value"],
        dump.estimates.iter().map(|row| {
            vec![
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.steps.to_string(),
                row.replicate.to_string(),
                row.parameter.to_string(),
                format_float(row.value),
            ]
        }),
    )?;

    let acf = dir.join("acf.csv");
    write_table(
        &acf,
        &[
            "scheme",
            "particles",
            "steps",
            "replicate",
            "parameter",
            "lag",
            "value",
        ],
        dump.acfs.iter().map(|row| {
            vec![
                row.scheme.name().to_string(),
                row.particles.to_string(),
                row.steps.to_string(),
                row.replicate.to_string(),
                row.parameter.to_string(),
                row.lag.to_string(),
                format_float(row.value),
            ]
        }),
    )?;

    let mut written = vec![chains, estimates, acf];
    if !dump.trajectories.is_empty() {
        let trajectories = dir.join("trajectories.csv");
        write_table(
            &trajectories,
            &[
                "scheme",
                "particles",
                "steps",
                "replicate",
                "iteration",
                "step",
                "state",
            ],
            dump.trajectories.iter().map(|row| {
                vec![
                    row.scheme.name().to_string(),
                    row.particles.to_string(),
                    row.steps.to_string(),
                    row.replicate.to_string(),
                    row.iteration.to_string(),
                    row.step.to_string(),
                    format_float(row.state),
                ]
            }),
        )?;
        written.push(trajectories);
    }
    Ok(written)
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: String,
    config: &'a ExperimentConfig,
}

pub(crate) fn write_manifest(dir: &Path, config: &ExperimentConfig) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let manifest = Manifest {
        version: format!("{}-v{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|error| Error::config(path.display().to_string(), error.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
