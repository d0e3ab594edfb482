//! Python bindings for the `reshuffle` crate.
//!
//! The module exposes the offspring selection schemes, their exact
//! enumeration oracles, the bootstrap and conditional particle filters on
//! the bundled state space models, trajectory estimators, and the particle
//! Gibbs sampler. Randomized entry points take a `seed` argument and are
//! reproducible: the same seed gives the same result.
//!
//! Build with `cargo build -p reshuffle-py`, then place the produced
//! `libreshuffle_py.so` on the import path as `reshuffle_py.so` (see
//! `python/smoke_test.py` at the repository root).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use reshuffle::estimate::{self, EstimatorKind, LossKind};
use reshuffle::filter::{bpf, csmc_sweep, FilterConfig, FilterOutput};
use reshuffle::models::{self, NlModel, StateSpaceModel, SvModel};
use reshuffle::particle::{self, MultiplicityVector};
use reshuffle::pgibbs::{self, IgPrior, PgConfig, PgPriors};
use reshuffle::rng::RngStream;
use reshuffle::select::{self, InputMode, SelectionInput, SelectionScheme};

fn value_error(error: reshuffle::Error) -> PyErr {
    PyValueError::new_err(error.to_string())
}

fn parse_scheme(name: &str) -> PyResult<SelectionScheme> {
    name.parse().map_err(value_error)
}

fn parse_estimator(name: &str) -> PyResult<EstimatorKind> {
    match name {
        "mmse" => Ok(EstimatorKind::Mmse),
        "mmae" => Ok(EstimatorKind::Mmae),
        "map" => Ok(EstimatorKind::Map),
        "sampled" => Ok(EstimatorKind::Sampled),
        other => Err(PyValueError::new_err(format!(
            "unknown estimator {other:?}, expected mmse, mmae, map, or sampled"
        ))),
    }
}

fn parse_loss(name: &str, threshold: Option<f64>) -> PyResult<LossKind> {
    match name {
        "l01" => {
            let threshold = threshold.ok_or_else(|| {
                PyValueError::new_err("the l01 loss needs an explicit threshold")
            })?;
            Ok(LossKind::ZeroOne { threshold })
        }
        "l1" => Ok(LossKind::Absolute),
        "l2" => Ok(LossKind::Squared),
        other => Err(PyValueError::new_err(format!(
            "unknown loss {other:?}, expected l01, l1, or l2"
        ))),
    }
}

fn multiplicities_from(counts: Vec<usize>) -> PyResult<MultiplicityVector> {
    let total = counts.iter().sum();
    MultiplicityVector::new(counts, total).map_err(value_error)
}

/// Names of every selection scheme, in scheme order.
#[pyfunction]
fn scheme_names() -> Vec<&'static str> {
    SelectionScheme::all().iter().map(|s| s.name()).collect()
}

/// Offspring counts minimizing the Kullback-Leibler objective for one
/// weight vector. Weights need not be normalized.
#[pyfunction]
fn kl_counts(weights: Vec<f64>, offspring: usize) -> PyResult<Vec<usize>> {
    let input = SelectionInput::weights(&weights);
    let counts = select::kl_reshuffle(&input, offspring).map_err(value_error)?;
    Ok(counts.into_inner())
}

/// Offspring counts minimizing the total variation distance for one
/// weight vector. Weights need not be normalized.
#[pyfunction]
fn tv_counts(weights: Vec<f64>, offspring: usize) -> PyResult<Vec<usize>> {
    let input = SelectionInput::weights(&weights);
    let counts = select::tv_reshuffle(&input, offspring).map_err(value_error)?;
    Ok(counts.into_inner())
}

/// Kullback-Leibler divergence from the offspring distribution implied by
/// `counts` to the target weights.
#[pyfunction]
fn kl_objective(weights: Vec<f64>, counts: Vec<usize>) -> PyResult<f64> {
    let counts = multiplicities_from(counts)?;
    select::kl_objective(&weights, &counts).map_err(value_error)
}

/// Total variation distance between the offspring distribution implied by
/// `counts` and the normalized weights.
#[pyfunction]
fn tv_objective(weights: Vec<f64>, counts: Vec<usize>) -> PyResult<f64> {
    let counts = multiplicities_from(counts)?;
    select::tv_objective(&weights, &counts).map_err(value_error)
}

/// Exact Kullback-Leibler optimum by enumerating every composition.
/// Feasible only for small offspring counts.
#[pyfunction]
fn brute_force_kl(weights: Vec<f64>, offspring: usize) -> PyResult<Vec<usize>> {
    let input = SelectionInput::weights(&weights);
    let counts = select::brute_force_kl_optimum(&input, offspring).map_err(value_error)?;
    Ok(counts.into_inner())
}

/// Exact total variation optimum by enumerating every composition.
/// Feasible only for small offspring counts.
#[pyfunction]
fn brute_force_tv(weights: Vec<f64>, offspring: usize) -> PyResult<Vec<usize>> {
    let input = SelectionInput::weights(&weights);
    let counts = select::brute_force_tv_optimum(&input, offspring).map_err(value_error)?;
    Ok(counts.into_inner())
}

/// Ancestor indices for the next generation under one scheme, sorted
/// ascending.
///
/// `values` are weights for weight-mode schemes and per-particle joint
/// log-likelihoods for likelihood-mode schemes (`kl_p`, `tv_p`, `ml`).
/// Only the stochastic baselines consume the seed.
#[pyfunction]
#[pyo3(signature = (scheme, values, offspring, seed = 0))]
fn select_ancestors(
    scheme: &str,
    values: Vec<f64>,
    offspring: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    let scheme = parse_scheme(scheme)?;
    let input = match scheme.mode() {
        InputMode::Weight => SelectionInput::weights(&values),
        InputMode::Likelihood => SelectionInput::log_likelihoods(&values),
    };
    let mut rng = RngStream::new(seed, 0).rng();
    select::select_ancestors(scheme, &input, offspring, &mut rng).map_err(value_error)
}

/// Normalizes log weights; returns the probabilities and the log of their
/// pre-normalization total.
#[pyfunction]
fn log_normalize(log_weights: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    particle::log_normalize(&log_weights).map_err(value_error)
}

/// Effective sample size of a normalized weight vector.
#[pyfunction]
fn ess(weights: Vec<f64>) -> f64 {
    particle::ess(&weights)
}

/// Per-step loss averaged over a trajectory. The `l01` loss needs a
/// `threshold`; `l1` and `l2` ignore it.
#[pyfunction]
#[pyo3(signature = (truth, estimate, loss, threshold = None))]
fn loss(truth: Vec<f64>, estimate: Vec<f64>, loss: &str, threshold: Option<f64>) -> PyResult<f64> {
    let kind = parse_loss(loss, threshold)?;
    estimate::loss(&truth, &estimate, kind).map_err(value_error)
}

/// Empirical autocorrelation of a chain at lags `0..=max_lag`.
#[pyfunction]
fn acf(chain: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    pgibbs::acf(&chain, max_lag).map_err(value_error)
}

/// Median of the last `window` entries of a chain.
#[pyfunction]
fn chain_median(chain: Vec<f64>, window: usize) -> PyResult<f64> {
    pgibbs::chain_median(&chain, window).map_err(value_error)
}

/// Log returns of a positive price series, one entry per consecutive pair.
#[pyfunction]
fn log_returns(prices: Vec<f64>) -> PyResult<Vec<f64>> {
    models::log_returns(&prices).map_err(value_error)
}

/// Posterior `(shape, rate)` of the transition noise variance given a
/// trajectory and the persistence, under an inverse gamma prior.
#[pyfunction]
#[pyo3(signature = (states, phi, prior_shape = 1e-3, prior_rate = 1e-3))]
fn sigma2_posterior(
    states: Vec<f64>,
    phi: f64,
    prior_shape: f64,
    prior_rate: f64,
) -> PyResult<(f64, f64)> {
    let prior = IgPrior {
        shape: prior_shape,
        rate: prior_rate,
    };
    pgibbs::sigma2_posterior(&states, phi, &prior).map_err(value_error)
}

/// Posterior `(shape, rate)` of the emission scale variance given a
/// trajectory and its observations, under an inverse gamma prior.
#[pyfunction]
#[pyo3(signature = (states, observations, prior_shape = 1e-3, prior_rate = 1e-3))]
fn beta2_posterior(
    states: Vec<f64>,
    observations: Vec<f64>,
    prior_shape: f64,
    prior_rate: f64,
) -> PyResult<(f64, f64)> {
    let prior = IgPrior {
        shape: prior_shape,
        rate: prior_rate,
    };
    pgibbs::beta2_posterior(&states, &observations, &prior).map_err(value_error)
}

fn filter_config(
    particles: usize,
    scheme: &str,
    ess_threshold_fraction: f64,
) -> PyResult<FilterConfig> {
    let mut config = FilterConfig::new(particles, parse_scheme(scheme)?);
    config.ess_threshold_fraction = ess_threshold_fraction;
    config.validate().map_err(value_error)?;
    Ok(config)
}

fn run_bpf(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    particles: usize,
    scheme: &str,
    seed: u64,
    ess_threshold_fraction: f64,
) -> PyResult<FilterResult> {
    let config = filter_config(particles, scheme, ess_threshold_fraction)?;
    let mut rng = RngStream::new(seed, 0).rng();
    let output = bpf(model, observations, &config, &mut rng).map_err(value_error)?;
    Ok(FilterResult { output })
}

fn run_csmc(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    reference: &[f64],
    particles: usize,
    scheme: &str,
    seed: u64,
    ess_threshold_fraction: f64,
) -> PyResult<(Vec<f64>, FilterResult)> {
    let config = filter_config(particles, scheme, ess_threshold_fraction)?;
    let mut rng = RngStream::new(seed, 0).rng();
    let (trajectory, output) =
        csmc_sweep(model, observations, &config, reference, &mut rng).map_err(value_error)?;
    Ok((trajectory, FilterResult { output }))
}

fn run_simulate(
    model: &dyn StateSpaceModel,
    steps: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mut rng = RngStream::new(seed, 0).rng();
    models::simulate(model, steps, &mut rng).map_err(value_error)
}

/// A finished filter run: per-step particle states and weights, the
/// genealogy, and the effective sample size trace.
#[pyclass(frozen, name = "FilterResult")]
struct FilterResult {
    output: FilterOutput,
}

#[pymethods]
impl FilterResult {
    /// Number of particles.
    #[getter]
    fn particles(&self) -> usize {
        self.output.genealogy.particles()
    }

    /// Number of time steps.
    #[getter]
    fn steps(&self) -> usize {
        self.output.genealogy.steps()
    }

    /// Particle states per step, outer index is the step.
    fn states(&self) -> Vec<Vec<f64>> {
        self.output.stored_states.clone()
    }

    /// Normalized weights per step, outer index is the step.
    fn weights(&self) -> Vec<Vec<f64>> {
        self.output.weight_history.clone()
    }

    /// Normalized weights of the final generation.
    fn final_weights(&self) -> Vec<f64> {
        self.output.final_system.norm_weights.clone()
    }

    /// Effective sample size per step.
    fn ess_history(&self) -> Vec<f64> {
        self.output.ess_history.clone()
    }

    /// Ancestor indices per step from the second step on, outer index is
    /// the step minus one.
    fn ancestors(&self) -> Vec<Vec<usize>> {
        self.output.genealogy.ancestors.clone()
    }

    /// Whether selection fired at each step covered by `ancestors`.
    fn resample_flags(&self) -> Vec<bool> {
        self.output.genealogy.resample_flags.clone()
    }

    /// Number of distinct first-step ancestors of each generation.
    fn distinct_initial_ancestors(&self) -> Vec<usize> {
        self.output.genealogy.distinct_initial_ancestors()
    }

    /// One estimate per step under an estimator (`mmse`, `mmae`, `map`,
    /// or `sampled`). Only `sampled` consumes the seed.
    #[pyo3(signature = (estimator, seed = 0))]
    fn estimate(&self, estimator: &str, seed: u64) -> PyResult<Vec<f64>> {
        let kind = parse_estimator(estimator)?;
        let mut rng = RngStream::new(seed, 0).rng();
        estimate::estimate(&self.output, kind, Some(&mut rng)).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "FilterResult(particles={}, steps={})",
            self.output.genealogy.particles(),
            self.output.genealogy.steps()
        )
    }
}

/// Stochastic volatility model with autoregressive log-variance states.
#[pyclass(frozen, name = "SvModel")]
struct PySvModel {
    inner: SvModel,
}

#[pymethods]
impl PySvModel {
    #[new]
    fn new(sigma: f64, beta: f64, phi: f64) -> PyResult<Self> {
        let inner = SvModel::new(sigma, beta, phi).map_err(value_error)?;
        Ok(PySvModel { inner })
    }

    /// Builds the model from variances instead of scales.
    #[staticmethod]
    fn from_variances(sigma2: f64, beta2: f64, phi: f64) -> PyResult<Self> {
        let inner = SvModel::from_variances(sigma2, beta2, phi).map_err(value_error)?;
        Ok(PySvModel { inner })
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2()
    }

    #[getter]
    fn beta2(&self) -> f64 {
        self.inner.beta2()
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.inner.phi()
    }

    /// Stationary variance of the latent log-volatility.
    fn stationary_variance(&self) -> f64 {
        self.inner.stationary_variance()
    }

    /// Draws a state and observation sequence of the given length.
    #[pyo3(signature = (steps, seed = 0))]
    fn simulate(&self, steps: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        run_simulate(&self.inner, steps, seed)
    }

    /// Runs the bootstrap particle filter on an observation sequence.
    #[pyo3(signature = (observations, particles, scheme, seed = 0, ess_threshold_fraction = 0.5))]
    fn filter(
        &self,
        observations: Vec<f64>,
        particles: usize,
        scheme: &str,
        seed: u64,
        ess_threshold_fraction: f64,
    ) -> PyResult<FilterResult> {
        run_bpf(
            &self.inner,
            &observations,
            particles,
            scheme,
            seed,
            ess_threshold_fraction,
        )
    }

    /// Runs one conditional sweep that keeps `reference` alive in the last
    /// particle slot, returning the newly drawn trajectory and the full
    /// filter output.
    #[pyo3(signature = (observations, reference, particles, scheme, seed = 0, ess_threshold_fraction = 0.5))]
    fn conditional_sweep(
        &self,
        observations: Vec<f64>,
        reference: Vec<f64>,
        particles: usize,
        scheme: &str,
        seed: u64,
        ess_threshold_fraction: f64,
    ) -> PyResult<(Vec<f64>, FilterResult)> {
        run_csmc(
            &self.inner,
            &observations,
            &reference,
            particles,
            scheme,
            seed,
            ess_threshold_fraction,
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "SvModel(sigma2={}, beta2={}, phi={})",
            self.inner.sigma2(),
            self.inner.beta2(),
            self.inner.phi()
        )
    }
}

/// Nonlinear benchmark model with oscillating drift and quadratic
/// observations.
#[pyclass(frozen, name = "NlModel")]
struct PyNlModel {
    inner: NlModel,
}

#[pymethods]
impl PyNlModel {
    #[new]
    fn new(sigma2_x: f64, sigma2_y: f64) -> PyResult<Self> {
        let inner = NlModel::new(sigma2_x, sigma2_y).map_err(value_error)?;
        Ok(PyNlModel { inner })
    }

    #[getter]
    fn sigma2_x(&self) -> f64 {
        self.inner.sigma2_x()
    }

    #[getter]
    fn sigma2_y(&self) -> f64 {
        self.inner.sigma2_y()
    }

    /// Deterministic part of the transition at step `n`.
    #[staticmethod]
    fn drift(x_prev: f64, n: usize) -> f64 {
        NlModel::drift(x_prev, n)
    }

    /// Draws a state and observation sequence of the given length.
    #[pyo3(signature = (steps, seed = 0))]
    fn simulate(&self, steps: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        run_simulate(&self.inner, steps, seed)
    }

    /// Runs the bootstrap particle filter on an observation sequence.
    #[pyo3(signature = (observations, particles, scheme, seed = 0, ess_threshold_fraction = 0.5))]
    fn filter(
        &self,
        observations: Vec<f64>,
        particles: usize,
        scheme: &str,
        seed: u64,
        ess_threshold_fraction: f64,
    ) -> PyResult<FilterResult> {
        run_bpf(
            &self.inner,
            &observations,
            particles,
            scheme,
            seed,
            ess_threshold_fraction,
        )
    }

    /// Runs one conditional sweep that keeps `reference` alive in the last
    /// particle slot, returning the newly drawn trajectory and the full
    /// filter output.
    #[pyo3(signature = (observations, reference, particles, scheme, seed = 0, ess_threshold_fraction = 0.5))]
    fn conditional_sweep(
        &self,
        observations: Vec<f64>,
        reference: Vec<f64>,
        particles: usize,
        scheme: &str,
        seed: u64,
        ess_threshold_fraction: f64,
    ) -> PyResult<(Vec<f64>, FilterResult)> {
        run_csmc(
            &self.inner,
            &observations,
            &reference,
            particles,
            scheme,
            seed,
            ess_threshold_fraction,
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "NlModel(sigma2_x={}, sigma2_y={})",
            self.inner.sigma2_x(),
            self.inner.sigma2_y()
        )
    }
}

/// One particle Gibbs chain: per-iteration parameter draws and any
/// retained trajectories.
#[pyclass(frozen, name = "PgResult")]
struct PgResult {
    sigma2: Vec<f64>,
    beta2: Vec<f64>,
    phi: Vec<f64>,
    trajectories: Vec<Vec<f64>>,
}

#[pymethods]
impl PgResult {
    /// Transition noise variance draws.
    #[getter]
    fn sigma2(&self) -> Vec<f64> {
        self.sigma2.clone()
    }

    /// Emission scale variance draws.
    #[getter]
    fn beta2(&self) -> Vec<f64> {
        self.beta2.clone()
    }

    /// Persistence draws.
    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.phi.clone()
    }

    /// Retained trajectories, one per recorded iteration.
    #[getter]
    fn trajectories(&self) -> Vec<Vec<f64>> {
        self.trajectories.clone()
    }

    fn __len__(&self) -> usize {
        self.sigma2.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PgResult(iterations={}, trajectories={})",
            self.sigma2.len(),
            self.trajectories.len()
        )
    }
}

/// Runs one particle Gibbs chain on a stochastic volatility observation
/// sequence, alternating conjugate parameter draws with a conditional
/// filter sweep.
#[pyfunction]
#[pyo3(signature = (
    observations,
    particles,
    iterations,
    scheme,
    seed = 0,
    ess_threshold_fraction = 0.5,
    trajectory_stride = 0,
    prior_shape = 1e-3,
    prior_rate = 1e-3,
))]
#[allow(clippy::too_many_arguments)]
fn particle_gibbs(
    observations: Vec<f64>,
    particles: usize,
    iterations: usize,
    scheme: &str,
    seed: u64,
    ess_threshold_fraction: f64,
    trajectory_stride: usize,
    prior_shape: f64,
    prior_rate: f64,
) -> PyResult<PgResult> {
    let mut config = PgConfig::new(particles, iterations, parse_scheme(scheme)?);
    config.ess_threshold_fraction = ess_threshold_fraction;
    config.trajectory_stride = trajectory_stride;
    let prior = IgPrior {
        shape: prior_shape,
        rate: prior_rate,
    };
    let priors = PgPriors {
        sigma2: prior,
        beta2: prior,
    };
    let mut rng = RngStream::new(seed, 0).rng();
    let record =
        pgibbs::particle_gibbs(&observations, &config, &priors, &mut rng).map_err(value_error)?;
    Ok(PgResult {
        sigma2: record.sigma2,
        beta2: record.beta2,
        phi: record.phi,
        trajectories: record.trajectories,
    })
}

#[pymodule]
fn reshuffle_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(scheme_names, m)?)?;
    m.add_function(wrap_pyfunction!(kl_counts, m)?)?;
    m.add_function(wrap_pyfunction!(tv_counts, m)?)?;
    m.add_function(wrap_pyfunction!(kl_objective, m)?)?;
    m.add_function(wrap_pyfunction!(tv_objective, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_kl, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_tv, m)?)?;
    m.add_function(wrap_pyfunction!(select_ancestors, m)?)?;
    m.add_function(wrap_pyfunction!(log_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(ess, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(chain_median, m)?)?;
    m.add_function(wrap_pyfunction!(log_returns, m)?)?;
    m.add_function(wrap_pyfunction!(sigma2_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(beta2_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(particle_gibbs, m)?)?;
    m.add_class::<FilterResult>()?;
    m.add_class::<PySvModel>()?;
    m.add_class::<PyNlModel>()?;
    m.add_class::<PgResult>()?;
    Ok(())
}
