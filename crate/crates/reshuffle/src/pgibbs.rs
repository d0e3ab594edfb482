//! Particle Gibbs for the stochastic volatility model.
//!
//! The sampler alternates two blocks. Parameter updates draw the transition
//! variance and the emission scale variance from their conjugate inverse
//! gamma posteriors and the persistence parameter from a rejection sampler,
//! each conditioned on the currently retained trajectory. The trajectory
//! update then runs one conditional sweep of the filter with the fresh
//! parameters, keeping the old trajectory alive in the conditioned slot.
//!
//! Chains are recorded from the initialization onwards, so `iterations`
//! entries means the initial values plus `iterations - 1` sweeps.
//! [`acf`] and [`chain_median`] provide the mixing diagnostics and the
//! trailing-window point estimates used to summarize chains.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{bpf, csmc_sweep, draw_final_index, FilterConfig, DEFAULT_ESS_THRESHOLD_FRACTION};
use crate::models::SvModel;
use crate::particle::extract_trajectory;
use crate::select::SelectionScheme;

/// Inverse gamma prior with density proportional to
/// `v^(-shape-1) * exp(-rate / v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgPrior {
    /// Shape parameter, conventionally `a`.
    pub shape: f64,
    /// Rate parameter, conventionally `b`.
    pub rate: f64,
}

impl Default for IgPrior {
    fn default() -> Self {
        IgPrior {
            shape: 1e-3,
            rate: 1e-3,
        }
    }
}

impl IgPrior {
    fn validate(&self) -> Result<()> {
        if !self.shape.is_finite() || self.shape <= 0.0 {
            return Err(Error::invalid(
                "shape",
                format!("must be positive, got {}", self.shape),
            ));
        }
        if !self.rate.is_finite() || self.rate <= 0.0 {
            return Err(Error::invalid(
                "rate",
                format!("must be positive, got {}", self.rate),
            ));
        }
        Ok(())
    }
}

/// Independent priors for the two variance parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PgPriors {
    /// Prior on the transition noise variance.
    pub sigma2: IgPrior,
    /// Prior on the emission scale variance.
    pub beta2: IgPrior,
}

/// Settings for one particle Gibbs chain.
#[derive(Debug, Clone)]
pub struct PgConfig {
    /// Particles per conditional sweep.
    pub particles: usize,
    /// Total chain length, counting the initialization as the first entry.
    pub iterations: usize,
    /// Offspring selection scheme used inside the sweeps.
    pub scheme: SelectionScheme,
    /// Iterations discarded by diagnostics; the chain itself keeps them.
    pub burn_in: usize,
    /// Trailing window for [`chain_median`] summaries.
    pub estimate_window: usize,
    /// Keep every k-th trajectory in the record; zero stores none.
    pub trajectory_stride: usize,
    /// Threshold fraction handed to the conditional sweeps.
    pub ess_threshold_fraction: f64,
}

impl PgConfig {
    /// Builds a config with the conventional defaults: no burn-in recorded,
    /// median window of 5000, and no stored trajectories.
    pub fn new(particles: usize, iterations: usize, scheme: SelectionScheme) -> Self {
        PgConfig {
            particles,
            iterations,
            scheme,
            burn_in: 0,
            estimate_window: 5000,
            trajectory_stride: 0,
            ess_threshold_fraction: DEFAULT_ESS_THRESHOLD_FRACTION,
        }
    }

    /// Checks the settings are runnable.
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("particles", "must be at least 1"));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::invalid(
                "iterations",
                format!(
                    "must exceed the burn-in, got {} with burn-in {}",
                    self.iterations, self.burn_in
                ),
            ));
        }
        if self.estimate_window == 0 {
            return Err(Error::invalid("estimate_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// One recorded chain: parameter draws per iteration and, when requested,
/// a thinned subset of the retained trajectories.
#[derive(Debug, Clone)]
pub struct ChainRecord {
    /// Transition noise variance draws.
    pub sigma2: Vec<f64>,
    /// Emission scale variance draws.
    pub beta2: Vec<f64>,
    /// Persistence draws.
    pub phi: Vec<f64>,
    /// Retained trajectories, every `trajectory_stride`-th iteration.
    pub trajectories: Vec<Vec<f64>>,
}

/// Parameters of the conjugate posterior for the transition noise variance,
/// given the trajectory and the persistence parameter.
///
/// Returns `(shape, rate)`: shape grows by half the trajectory length and
/// the rate collects the stationary initial term plus the squared
/// autoregressive residuals.
pub fn sigma2_posterior(x: &[f64], phi: f64, prior: &IgPrior) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !phi.is_finite() || phi.abs() >= 1.0 {
        return Err(Error::invalid(
            "phi",
            format!("must lie strictly inside (-1, 1), got {phi}"),
        ));
    }
    prior.validate()?;
    let shape = prior.shape + x.len() as f64 / 2.0;
    let stationary = x[0] * x[0] * (1.0 - phi * phi) / 2.0;
    let residuals: f64 = x
        .windows(2)
        .map(|w| {
            let diff = w[1] - phi * w[0];
            diff * diff
        })
        .sum();
    Ok((shape, prior.rate + stationary + residuals / 2.0))
}

/// Parameters of the conjugate posterior for the emission scale variance,
/// given states and observations.
pub fn beta2_posterior(x: &[f64], y: &[f64], prior: &IgPrior) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    prior.validate()?;
    let shape = prior.shape + x.len() as f64 / 2.0;
    let scaled: f64 = x
        .iter()
        .zip(y)
        .map(|(&xn, &yn)| yn * yn * (-xn).exp())
        .sum();
    Ok((shape, prior.rate + scaled / 2.0))
}

/// Draws from the inverse gamma distribution with the given shape and rate,
/// via the reciprocal of a gamma draw.
pub fn sample_inverse_gamma(shape: f64, rate: f64, rng: &mut dyn RngCore) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::invalid(
            "shape",
            format!("must be positive, got {shape}"),
        ));
    }
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::invalid("rate", format!("must be positive, got {rate}")));
    }
    let gamma = Gamma::new(shape, 1.0 / rate).expect("parameters validated above");
    loop {
        let draw = 1.0 / gamma.sample(rng);
        if draw.is_finite() && draw > 0.0 {
            return Ok(draw);
        }
    }
}

/// Gibbs update for the transition noise variance.
pub fn sample_sigma2(x: &[f64], phi: f64, prior: &IgPrior, rng: &mut dyn RngCore) -> Result<f64> {
    let (shape, rate) = sigma2_posterior(x, phi, prior)?;
    sample_inverse_gamma(shape, rate, rng)
}

/// Gibbs update for the emission scale variance.
pub fn sample_beta2(
    x: &[f64],
    y: &[f64],
    prior: &IgPrior,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let (shape, rate) = beta2_posterior(x, y, prior)?;
    sample_inverse_gamma(shape, rate, rng)
}

/// Rejection-sampling cap before the update gives up and keeps the current
/// persistence value.
pub const PHI_REJECTION_CAP: usize = 1000;

/// Gibbs update for the persistence parameter.
///
/// Proposes from the Gaussian conditional implied by the autoregression
/// (ignoring the stationary initial term), rejects proposals outside
/// `(-1, 1)`, and accepts the rest with probability proportional to the
/// stationary term `sqrt(1 - phi^2) * exp(-x_1^2 (1 - phi^2) / (2 sigma2))`
/// normalized by its maximum. After [`PHI_REJECTION_CAP`] attempts the
/// update keeps `current` and logs a warning. A trajectory with no usable
/// autoregressive signal falls back to a uniform draw on `(-1, 1)`.
pub fn sample_phi(
    x: &[f64],
    sigma2: f64,
    current: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid(
            "trajectory",
            format!("persistence update needs at least two steps, got {}", x.len()),
        ));
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::invalid(
            "sigma2",
            format!("must be positive, got {sigma2}"),
        ));
    }
    let sxx: f64 = x[..x.len() - 1].iter().map(|&v| v * v).sum();
    let sxy: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    if sxx == 0.0 {
        return Ok(rng.random_range(-1.0..1.0));
    }
    let mean = sxy / sxx;
    let sd = (sigma2 / sxx).sqrt();
    let proposal = Normal::new(mean, sd).expect("finite mean and positive deviation");

    let c = x[0] * x[0] / (2.0 * sigma2);
    let log_max = if c <= 0.5 {
        -c
    } else {
        -0.5 * (2.0 * c).ln() - 0.5
    };

    for _ in 0..PHI_REJECTION_CAP {
        let candidate = proposal.sample(rng);
        if candidate.abs() >= 1.0 {
            continue;
        }
        let u = 1.0 - candidate * candidate;
        let log_accept = 0.5 * u.ln() - c * u - log_max;
        if rng.random::<f64>() < log_accept.exp() {
            return Ok(candidate);
        }
    }
    log::warn!(
        "persistence update hit the rejection cap of {PHI_REJECTION_CAP}; keeping {current}"
    );
    Ok(current)
}

/// Runs one particle Gibbs chain on an observation sequence.
///
/// The chain starts from unit variances, a persistence drawn uniformly from
/// `(-0.5, 0.5)`, and a trajectory taken from a throwaway unconditional
/// filter run. Each sweep updates the transition variance, the emission
/// variance, and the persistence in that order, then refreshes the
/// trajectory with a conditional sweep under the new parameters. Errors
/// inside a sweep carry the one-based iteration index.
pub fn particle_gibbs(
    observations: &[f64],
    config: &PgConfig,
    priors: &PgPriors,
    rng: &mut dyn RngCore,
) -> Result<ChainRecord> {
    config.validate()?;
    if observations.len() < 2 {
        return Err(Error::invalid(
            "observations",
            format!("need at least two steps, got {}", observations.len()),
        ));
    }

    let filter_config = FilterConfig {
        particles: config.particles,
        scheme: config.scheme,
        track_likelihood: config.scheme.mode() == crate::select::InputMode::Likelihood,
        ess_threshold_fraction: config.ess_threshold_fraction,
    };

    let mut sigma2 = 1.0;
    let mut beta2 = 1.0;
    let mut phi = rng.random_range(-0.5..0.5);

    let model = SvModel::from_variances(sigma2, beta2, phi)?;
    let output = bpf(&model, observations, &filter_config, rng)
        .map_err(|source| at_iteration(1, source))?;
    let index = draw_final_index(&output, config.scheme.mode(), rng)
        .map_err(|source| at_iteration(1, source))?;
    let mut trajectory = extract_trajectory(&output.genealogy, &output.stored_states, index)?;

    let mut record = ChainRecord {
        sigma2: Vec::with_capacity(config.iterations),
        beta2: Vec::with_capacity(config.iterations),
        phi: Vec::with_capacity(config.iterations),
        trajectories: Vec::new(),
    };
    record.sigma2.push(sigma2);
    record.beta2.push(beta2);
    record.phi.push(phi);
    if config.trajectory_stride > 0 {
        record.trajectories.push(trajectory.clone());
    }

    for iteration in 2..=config.iterations {
        sigma2 = sample_sigma2(&trajectory, phi, &priors.sigma2, rng)
            .map_err(|source| at_iteration(iteration, source))?;
        beta2 = sample_beta2(&trajectory, observations, &priors.beta2, rng)
            .map_err(|source| at_iteration(iteration, source))?;
        phi = sample_phi(&trajectory, sigma2, phi, rng)
            .map_err(|source| at_iteration(iteration, source))?;

        let model = SvModel::from_variances(sigma2, beta2, phi)
            .map_err(|source| at_iteration(iteration, source))?;
        let (refreshed, _) = csmc_sweep(&model, observations, &filter_config, &trajectory, rng)
            .map_err(|source| at_iteration(iteration, source))?;
        trajectory = refreshed;

        record.sigma2.push(sigma2);
        record.beta2.push(beta2);
        record.phi.push(phi);
        if config.trajectory_stride > 0 && (iteration - 1) % config.trajectory_stride == 0 {
            record.trajectories.push(trajectory.clone());
        }
    }
    Ok(record)
}

/// Empirical autocorrelation of a chain up to `max_lag`, inclusive.
///
/// Entry `k` is the lag-`k` autocovariance over the full-chain variance, so
/// entry zero is exactly one.
pub fn acf(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(Error::EmptyInput);
    }
    if max_lag >= chain.len() {
        return Err(Error::WindowTooLarge {
            window: max_lag,
            len: chain.len(),
        });
    }
    let mean = chain.iter().sum::<f64>() / chain.len() as f64;
    let centered: Vec<f64> = chain.iter().map(|c| c - mean).collect();
    let denominator: f64 = centered.iter().map(|c| c * c).sum();
    if denominator == 0.0 {
        return Err(Error::ConstantChain);
    }
    Ok((0..=max_lag)
        .map(|lag| {
            let numerator: f64 = centered[..chain.len() - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum();
            numerator / denominator
        })
        .collect())
}

/// Median of the trailing `window` entries of a chain.
pub fn chain_median(chain: &[f64], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::invalid("window", "must be at least 1"));
    }
    if window > chain.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: chain.len(),
        });
    }
    let mut tail = chain[chain.len() - window..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).expect("chain entries are ordered"));
    let middle = tail.len() / 2;
    if tail.len() % 2 == 1 {
        Ok(tail[middle])
    } else {
        Ok((tail[middle - 1] + tail[middle]) / 2.0)
    }
}

fn at_iteration(iteration: usize, source: Error) -> Error {
    Error::Iteration {
        iteration,
        source: Box::new(source),
    }
}
