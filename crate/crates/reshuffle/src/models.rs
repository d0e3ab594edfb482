//! Benchmark state-space models and forward simulation.
//!
//! Two univariate models drive the filters and the parameter-inference
//! experiments: a stochastic volatility model with AR(1) latent dynamics
//! and multiplicative Gaussian noise on the observations, and a
//! time-inhomogeneous non-linear model whose squared-emission likelihood
//! makes the smoothing posterior multimodal.
//!
//! Both are exposed through the [`StateSpaceModel`] trait, which pairs every
//! sampler with the log-density the filters evaluate. Time indices are
//! one-based: `sample_transition(x_prev, n, rng)` draws the state at time
//! `n` from the state at time `n - 1`.

use std::f64::consts::PI;

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Interface shared by every latent-state model the filters can run on.
///
/// Sampler and density methods come in pairs and must agree: a sample drawn
/// by `sample_transition` is distributed according to the density integrated
/// by `transition_log_density`, and likewise for the initial and emission
/// pairs. Models are immutable after construction and safe to share across
/// threads.
pub trait StateSpaceModel: Send + Sync {
    /// Draws the state at time 1 from the initial distribution.
    fn sample_initial(&self, rng: &mut dyn RngCore) -> f64;

    /// Log-density of the initial distribution at `x`.
    fn initial_log_density(&self, x: f64) -> f64;

    /// Draws the state at time `n` given the state at time `n - 1`.
    fn sample_transition(&self, x_prev: f64, n: usize, rng: &mut dyn RngCore) -> f64;

    /// Log-density of the transition into time `n`.
    fn transition_log_density(&self, x: f64, x_prev: f64, n: usize) -> f64;

    /// Draws an observation at time `n` given the state `x`.
    fn sample_emission(&self, x: f64, n: usize, rng: &mut dyn RngCore) -> f64;

    /// Log-density of observing `y` at time `n` given the state `x`.
    fn emission_log_density(&self, y: f64, x: f64, n: usize) -> f64;

    /// Standard deviation of the additive transition noise.
    ///
    /// Loss functions use this to derive a tolerance band that scales with
    /// the state dynamics.
    fn transition_noise_std(&self) -> f64;
}

/// Stochastic volatility model.
///
/// The latent log-volatility follows a stationary AR(1) process and scales
/// the observation noise:
///
/// ```text
/// x_1 ~ Normal(0, sigma^2 / (1 - phi^2))
/// x_n = phi * x_{n-1} + sigma * v_n
/// y_n = beta * exp(x_n / 2) * e_n
/// ```
///
/// with `v_n` and `e_n` independent standard Gaussians. Internally the model
/// stores the variances `sigma^2` and `beta^2`, which are the quantities the
/// conjugate parameter updates in [`crate::pgibbs`] operate on.
#[derive(Debug, Clone)]
pub struct SvModel {
    sigma2: f64,
    beta2: f64,
    phi: f64,
}

impl SvModel {
    /// Builds the model from the standard-deviation parameterization
    /// `(sigma, beta, phi)`.
    pub fn new(sigma: f64, beta: f64, phi: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        Self::from_variances(sigma * sigma, beta * beta, phi)
    }

    /// Builds the model directly from the variances `(sigma^2, beta^2, phi)`.
    pub fn from_variances(sigma2: f64, beta2: f64, phi: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::invalid("sigma2", format!("must be positive, got {sigma2}")));
        }
        if !beta2.is_finite() || beta2 <= 0.0 {
            return Err(Error::invalid("beta2", format!("must be positive, got {beta2}")));
        }
        if !phi.is_finite() || phi.abs() >= 1.0 {
            return Err(Error::invalid(
                "phi",
                format!("must lie strictly inside (-1, 1), got {phi}"),
            ));
        }
        Ok(SvModel { sigma2, beta2, phi })
    }

    /// Transition noise variance `sigma^2`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Emission scale variance `beta^2`.
    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// Persistence parameter `phi`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Variance of the stationary AR(1) distribution, `sigma^2 / (1 - phi^2)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma2 / (1.0 - self.phi * self.phi)
    }
}

impl StateSpaceModel for SvModel {
    fn sample_initial(&self, rng: &mut dyn RngCore) -> f64 {
        sample_gaussian(0.0, self.stationary_variance(), rng)
    }

    fn initial_log_density(&self, x: f64) -> f64 {
        gaussian_log_density(x, 0.0, self.stationary_variance())
    }

    fn sample_transition(&self, x_prev: f64, _n: usize, rng: &mut dyn RngCore) -> f64 {
        sample_gaussian(self.phi * x_prev, self.sigma2, rng)
    }

    fn transition_log_density(&self, x: f64, x_prev: f64, _n: usize) -> f64 {
        gaussian_log_density(x, self.phi * x_prev, self.sigma2)
    }

    fn sample_emission(&self, x: f64, _n: usize, rng: &mut dyn RngCore) -> f64 {
        sample_gaussian(0.0, self.beta2 * x.exp(), rng)
    }

    fn emission_log_density(&self, y: f64, x: f64, _n: usize) -> f64 {
        gaussian_log_density(y, 0.0, self.beta2 * x.exp())
    }

    fn transition_noise_std(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Non-linear, time-inhomogeneous benchmark model.
///
/// ```text
/// x_1 ~ Normal(0, sigma2_x)
/// x_n = x_{n-1}/2 + 25 x_{n-1} / (1 + x_{n-1}^2) + 8 cos(1.2 n) + v_n
/// y_n = x_n^2 / 20 + u_n
/// ```
///
/// with `v_n ~ Normal(0, sigma2_x)` and `u_n ~ Normal(0, sigma2_y)`. The
/// squared state in the emission makes the smoothing posterior multimodal:
/// the data cannot distinguish `x` from `-x` except through the drift.
#[derive(Debug, Clone)]
pub struct NlModel {
    sigma2_x: f64,
    sigma2_y: f64,
}

impl NlModel {
    /// Builds the model from the transition and emission noise variances.
    pub fn new(sigma2_x: f64, sigma2_y: f64) -> Result<Self> {
        if !sigma2_x.is_finite() || sigma2_x <= 0.0 {
            return Err(Error::invalid(
                "sigma2_x",
                format!("must be positive, got {sigma2_x}"),
            ));
        }
        if !sigma2_y.is_finite() || sigma2_y <= 0.0 {
            return Err(Error::invalid(
                "sigma2_y",
                format!("must be positive, got {sigma2_y}"),
            ));
        }
        Ok(NlModel { sigma2_x, sigma2_y })
    }

    /// Transition noise variance.
    pub fn sigma2_x(&self) -> f64 {
        self.sigma2_x
    }

    /// Emission noise variance.
    pub fn sigma2_y(&self) -> f64 {
        self.sigma2_y
    }

    /// Deterministic part of the transition into time `n`.
    ///
    /// The cosine forcing term uses the one-based index of the step being
    /// entered, so the transition from time 1 to time 2 evaluates
    /// `8 cos(2.4)`.
    pub fn drift(x_prev: f64, n: usize) -> f64 {
        x_prev / 2.0 + 25.0 * x_prev / (1.0 + x_prev * x_prev) + 8.0 * (1.2 * n as f64).cos()
    }
}

impl StateSpaceModel for NlModel {
    fn sample_initial(&self, rng: &mut dyn RngCore) -> f64 {
        sample_gaussian(0.0, self.sigma2_x, rng)
    }

    fn initial_log_density(&self, x: f64) -> f64 {
        gaussian_log_density(x, 0.0, self.sigma2_x)
    }

    fn sample_transition(&self, x_prev: f64, n: usize, rng: &mut dyn RngCore) -> f64 {
        sample_gaussian(Self::drift(x_prev, n), self.sigma2_x, rng)
    }

    fn transition_log_density(&self, x: f64, x_prev: f64, n: usize) -> f64 {
        gaussian_log_density(x, Self::drift(x_prev, n), self.sigma2_x)
    }

    fn sample_emission(&self, x: f64, _n: usize, rng: &mut dyn RngCore) -> f64 {
        sample_gaussian(x * x / 20.0, self.sigma2_y, rng)
    }

    fn emission_log_density(&self, y: f64, x: f64, _n: usize) -> f64 {
        gaussian_log_density(y, x * x / 20.0, self.sigma2_y)
    }

    fn transition_noise_std(&self) -> f64 {
        self.sigma2_x.sqrt()
    }
}

/// Simulates `steps` time points of states and observations.
///
/// The first state is drawn from the initial distribution, each subsequent
/// state from the transition, and every observation from the emission at its
/// own time index. Output is deterministic given the generator state.
pub fn simulate(
    model: &dyn StateSpaceModel,
    steps: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let mut states = Vec::with_capacity(steps);
    let mut observations = Vec::with_capacity(steps);
    let first = model.sample_initial(rng);
    states.push(first);
    observations.push(model.sample_emission(first, 1, rng));
    for n in 2..=steps {
        let x = model.sample_transition(states[n - 2], n, rng);
        states.push(x);
        observations.push(model.sample_emission(x, n, rng));
    }
    Ok((states, observations))
}

/// Converts a series of asset prices into logarithmic returns.
///
/// Entry `n` of the output is `ln(prices[n + 1] / prices[n])`, so `m` prices
/// yield `m - 1` returns. Prices must be strictly positive; a violation is
/// reported with the one-based row of the offending price.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::invalid(
            "prices",
            format!("need at least two prices, got {}", prices.len()),
        ));
    }
    for (i, &price) in prices.iter().enumerate() {
        if !price.is_finite() || price <= 0.0 {
            return Err(Error::Ingest {
                row: i + 1,
                message: format!("price must be positive, got {price}"),
            });
        }
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

fn sample_gaussian(mean: f64, variance: f64, rng: &mut dyn RngCore) -> f64 {
    Normal::new(mean, variance.sqrt())
        .expect("variance is validated at construction")
        .sample(rng)
}

fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> f64 {
    let diff = x - mean;
    -0.5 * ((2.0 * PI * variance).ln() + diff * diff / variance)
}
