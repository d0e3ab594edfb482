//! Experiment configuration: TOML schema, defaults, and validation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{EstimatorKind, LossKind};
use crate::filter::DEFAULT_ESS_THRESHOLD_FRACTION;
use crate::models::{NlModel, SvModel};
use crate::pgibbs::PgPriors;
use crate::select::SelectionScheme;

/// Experiment family selected by the `experiment` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Loss tables for the stochastic volatility model.
    SvLoss,
    /// Loss tables for the non-linear model, over a grid of noise variances.
    NlLoss,
    /// Genealogy dumps showing how fast ancestries collapse.
    Degeneracy,
    /// Particle Gibbs chains on simulated volatility data.
    PgSynthetic,
    /// Particle Gibbs chains on log-returns of an ingested price series.
    PgPrices,
}

impl ExperimentKind {
    /// The snake_case name used in configs and result rows.
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::SvLoss => "sv_loss",
            ExperimentKind::NlLoss => "nl_loss",
            ExperimentKind::Degeneracy => "degeneracy",
            ExperimentKind::PgSynthetic => "pg_synthetic",
            ExperimentKind::PgPrices => "pg_prices",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Loss function named in a config; the zero-one tolerance is derived from
/// the model at run time, so configs only carry the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossName {
    /// Zero-one loss with tolerance half the transition noise deviation.
    #[serde(rename = "l01")]
    ZeroOne,
    /// Mean absolute deviation per step.
    #[serde(rename = "l1")]
    Absolute,
    /// Mean squared deviation per step.
    #[serde(rename = "l2")]
    Squared,
}

impl LossName {
    /// The short name used in configs and result rows.
    pub fn name(&self) -> &'static str {
        match self {
            LossName::ZeroOne => "l01",
            LossName::Absolute => "l1",
            LossName::Squared => "l2",
        }
    }

    /// Materializes the loss, supplying the zero-one tolerance.
    pub fn to_loss(&self, zero_one_threshold: f64) -> LossKind {
        match self {
            LossName::ZeroOne => LossKind::ZeroOne {
                threshold: zero_one_threshold,
            },
            LossName::Absolute => LossKind::Absolute,
            LossName::Squared => LossKind::Squared,
        }
    }
}

impl fmt::Display for LossName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stochastic volatility parameters, given as deviations plus persistence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvParams {
    /// Transition noise standard deviation.
    pub sigma: f64,
    /// Emission scale.
    pub beta: f64,
    /// AR(1) persistence.
    pub phi: f64,
}

impl Default for SvParams {
    fn default() -> Self {
        SvParams {
            sigma: 1.0,
            beta: 0.5,
            phi: 0.91,
        }
    }
}

impl SvParams {
    /// Builds the model, validating the parameters.
    pub fn model(&self) -> Result<SvModel> {
        SvModel::new(self.sigma, self.beta, self.phi)
    }
}

/// Non-linear model settings: one experiment cell per `[sigma2_x, sigma2_y]`
/// variance pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlParams {
    /// Noise variance pairs to sweep.
    pub thetas: Vec<[f64; 2]>,
    /// When set, also dump the per-step estimates of this estimator next to
    /// the true states.
    pub state_dump: Option<EstimatorKind>,
}

impl Default for NlParams {
    fn default() -> Self {
        NlParams {
            thetas: vec![[1.0, 1.0], [10.0, 10.0]],
            state_dump: None,
        }
    }
}

impl NlParams {
    /// Builds the model for one variance pair, validating it.
    pub fn model(theta: [f64; 2]) -> Result<NlModel> {
        NlModel::new(theta[0], theta[1])
    }
}

/// Particle Gibbs settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgParams {
    /// Chain length, counting the initialization.
    pub iterations: usize,
    /// Leading iterations excluded from medians and autocorrelations.
    pub burn_in: usize,
    /// Trailing window for the chain medians, clamped to the retained
    /// length.
    pub estimate_window: usize,
    /// Keep every k-th reference trajectory; zero keeps none.
    pub trajectory_stride: usize,
    /// Largest autocorrelation lag, clamped to the retained length minus
    /// one.
    pub max_lag: usize,
    /// Price series for [`ExperimentKind::PgPrices`]; first column dates,
    /// second column closing prices, with a header row.
    pub prices_path: Option<PathBuf>,
    /// Inverse gamma priors on the two variances.
    pub priors: PgPriors,
}

impl Default for PgParams {
    fn default() -> Self {
        PgParams {
            iterations: 2000,
            burn_in: 0,
            estimate_window: 5000,
            trajectory_stride: 0,
            max_lag: 100,
            prices_path: None,
            priors: PgPriors::default(),
        }
    }
}

/// A full experiment description, deserialized from TOML.
///
/// Every field except `experiment` has a default, so a minimal config is a
/// single line. Unknown keys are rejected with the offending name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Which experiment family to run.
    pub experiment: ExperimentKind,
    /// Master seed; every random stream in the run derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Directory receiving the CSV tables and the manifest.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Independent repetitions per cell.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Particle counts to sweep.
    #[serde(default = "default_particle_counts")]
    pub particle_counts: Vec<usize>,
    /// Sequence lengths to sweep.
    #[serde(default = "default_step_counts")]
    pub step_counts: Vec<usize>,
    /// Offspring selection schemes to compare.
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SelectionScheme>,
    /// Estimators scored by the loss experiments.
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Losses scored by the loss experiments.
    #[serde(default = "default_losses")]
    pub losses: Vec<LossName>,
    /// Fraction of the particle count below which selection fires.
    #[serde(default = "default_ess_threshold_fraction")]
    pub ess_threshold_fraction: f64,
    /// Stochastic volatility parameters.
    #[serde(default)]
    pub sv: SvParams,
    /// Non-linear model parameters.
    #[serde(default)]
    pub nl: NlParams,
    /// Particle Gibbs parameters.
    #[serde(default)]
    pub pg: PgParams,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_replicates() -> usize {
    10
}

fn default_particle_counts() -> Vec<usize> {
    vec![500]
}

fn default_step_counts() -> Vec<usize> {
    vec![50, 100, 500]
}

fn default_schemes() -> Vec<SelectionScheme> {
    SelectionScheme::all().to_vec()
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::Mmse,
        EstimatorKind::Mmae,
        EstimatorKind::Map,
        EstimatorKind::Sampled,
    ]
}

fn default_losses() -> Vec<LossName> {
    vec![LossName::ZeroOne, LossName::Absolute, LossName::Squared]
}

fn default_ess_threshold_fraction() -> f64 {
    DEFAULT_ESS_THRESHOLD_FRACTION
}

impl ExperimentConfig {
    /// Builds a config for one experiment with every other field at its
    /// default.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            seed: 0,
            output_dir: default_output_dir(),
            replicates: default_replicates(),
            particle_counts: default_particle_counts(),
            step_counts: default_step_counts(),
            schemes: default_schemes(),
            estimators: default_estimators(),
            losses: default_losses(),
            ess_threshold_fraction: default_ess_threshold_fraction(),
            sv: SvParams::default(),
            nl: NlParams::default(),
            pg: PgParams::default(),
        }
    }

    /// Checks every invariant the runners rely on.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        let lists: [(&'static str, usize); 5] = [
            ("particle_counts", self.particle_counts.len()),
            ("step_counts", self.step_counts.len()),
            ("schemes", self.schemes.len()),
            ("estimators", self.estimators.len()),
            ("losses", self.losses.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                return Err(Error::invalid(name, "must not be empty"));
            }
        }
        if self.particle_counts.iter().any(|&s| s == 0) {
            return Err(Error::invalid("particle_counts", "entries must be at least 1"));
        }
        if self.step_counts.iter().any(|&n| n == 0) {
            return Err(Error::invalid("step_counts", "entries must be at least 1"));
        }
        if !self.ess_threshold_fraction.is_finite()
            || self.ess_threshold_fraction <= 0.0
            || self.ess_threshold_fraction > 1.0
        {
            return Err(Error::invalid(
                "ess_threshold_fraction",
                format!("must lie in (0, 1], got {}", self.ess_threshold_fraction),
            ));
        }
        match self.experiment {
            ExperimentKind::SvLoss => {
                self.sv.model()?;
            }
            ExperimentKind::NlLoss => {
                if self.nl.thetas.is_empty() {
                    return Err(Error::invalid(
                        "nl.thetas",
                        "must list at least one variance pair",
                    ));
                }
                for &theta in &self.nl.thetas {
                    NlParams::model(theta)?;
                }
            }
            ExperimentKind::Degeneracy => {
                self.sv.model()?;
                if self.step_counts.len() != 1 {
                    return Err(Error::invalid(
                        "step_counts",
                        format!(
                            "degeneracy dumps use a single step count, got {}",
                            self.step_counts.len()
                        ),
                    ));
                }
            }
            ExperimentKind::PgSynthetic => {
                self.sv.model()?;
                self.validate_pg()?;
            }
            ExperimentKind::PgPrices => {
                self.validate_pg()?;
                if self.pg.prices_path.is_none() {
                    return Err(Error::invalid(
                        "pg.prices_path",
                        "price experiments need an input file",
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_pg(&self) -> Result<()> {
        if self.pg.iterations <= self.pg.burn_in {
            return Err(Error::invalid(
                "pg.iterations",
                format!(
                    "must exceed the burn-in, got {} with burn-in {}",
                    self.pg.iterations, self.pg.burn_in
                ),
            ));
        }
        if self.pg.estimate_window == 0 {
            return Err(Error::invalid("pg.estimate_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// Reads, parses, and validates a TOML config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|error| Error::config(path.display().to_string(), error.to_string()))?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|error| Error::config(path.display().to_string(), error.to_string()))?;
    config.validate()?;
    Ok(config)
}
