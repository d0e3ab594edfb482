//! Bootstrap particle filters and the conditional kernel for particle Gibbs.
//!
//! One sequential engine drives three entry points. [`bpf`] is the plain
//! bootstrap filter: propagate from the transition, weight by the emission,
//! and fire the configured offspring selection scheme whenever the effective
//! sample size of the previous step drops below a threshold.
//! [`bpf_with_likelihood`] additionally maintains each particle's joint
//! log-likelihood, the quantity likelihood-mode schemes select on.
//! [`csmc_sweep`] is the conditional variant: one particle slot is forced to
//! follow a reference trajectory and survives every selection, and the sweep
//! returns a trajectory drawn from the final population.
//!
//! The first step never fires selection; afterwards the trigger is
//! `ess < ess_threshold_fraction * S`, evaluated strictly on the previous
//! step's normalized weights. When selection fires, the carried weights
//! reset to one and the next weights are the bare emission densities.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::particle::{
    categorical_draw, ess, extract_trajectory, log_normalize, Genealogy, ParticleSystem,
};
use crate::select::{select_ancestors, InputMode, SelectionInput, SelectionScheme};

/// Fraction of the particle count below which the effective sample size
/// triggers offspring selection.
pub const DEFAULT_ESS_THRESHOLD_FRACTION: f64 = 0.5;

/// Settings for a single filter run.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// Number of particles.
    pub particles: usize,
    /// Offspring selection scheme fired on degenerate steps.
    pub scheme: SelectionScheme,
    /// Whether to maintain per-particle joint log-likelihoods.
    ///
    /// Required by likelihood-mode schemes; optional otherwise.
    pub track_likelihood: bool,
    /// Selection fires when the effective sample size drops below this
    /// fraction of the particle count. Must lie in `(0, 1]`.
    pub ess_threshold_fraction: f64,
}

impl FilterConfig {
    /// Builds a config with the default threshold, enabling likelihood
    /// tracking automatically when the scheme needs it.
    pub fn new(particles: usize, scheme: SelectionScheme) -> Self {
        FilterConfig {
            particles,
            scheme,
            track_likelihood: scheme.mode() == InputMode::Likelihood,
            ess_threshold_fraction: DEFAULT_ESS_THRESHOLD_FRACTION,
        }
    }

    /// Checks the settings are runnable.
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("particles", "must be at least 1"));
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
        if self.scheme.mode() == InputMode::Likelihood && !self.track_likelihood {
            return Err(Error::invalid(
                "track_likelihood",
                "likelihood-mode schemes need the filter to maintain joint likelihoods",
            ));
        }
        Ok(())
    }
}

/// Everything a filter run produces.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// Population after the last step: states, carried log-weights
    /// normalized in log space, simplex weights, and joint log-likelihoods
    /// when tracked.
    pub final_system: ParticleSystem,
    /// Ancestor indices and selection flags for every step.
    pub genealogy: Genealogy,
    /// States of every particle at every step, indexed `[step][particle]`.
    pub stored_states: Vec<Vec<f64>>,
    /// Normalized weights at every step, recorded before any selection
    /// reset so estimators can consume them directly.
    pub weight_history: Vec<Vec<f64>>,
    /// Effective sample size of each step's normalized weights.
    pub ess_history: Vec<f64>,
}

/// Runs the bootstrap particle filter over an observation sequence.
pub fn bpf(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    config: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    run_filter(model, observations, config, None, rng)
}

/// Runs the bootstrap filter while maintaining per-particle joint
/// log-likelihoods, regardless of the config's `track_likelihood` flag.
///
/// Each particle carries `log p(x_{1:n}, y_{1:n})`, updated as emission plus
/// transition plus the parent's value and re-indexed through the ancestors
/// on every selection.
pub fn bpf_with_likelihood(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    config: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    let mut config = config.clone();
    config.track_likelihood = true;
    run_filter(model, observations, &config, None, rng)
}

/// Runs one conditional sweep and returns the drawn trajectory together
/// with the full filter output.
///
/// The last particle slot replays `reference` at every step and its
/// ancestor is pinned to itself whenever selection fires, so the reference
/// trajectory always survives. Initial weights are uniform. The returned
/// trajectory is drawn categorically from the final normalized weights, or
/// from the normalized joint likelihoods for likelihood-mode schemes.
pub fn csmc_sweep(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    config: &FilterConfig,
    reference: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, FilterOutput)> {
    let output = run_filter(model, observations, config, Some(reference), rng)?;
    let index = draw_final_index(&output, config.scheme.mode(), rng)
        .map_err(|error| collapse_at(error, observations.len()))?;
    let trajectory = extract_trajectory(&output.genealogy, &output.stored_states, index)?;
    Ok((trajectory, output))
}

/// Picks one particle index from the final population, categorically by
/// weight or by normalized joint likelihood.
pub(crate) fn draw_final_index(
    output: &FilterOutput,
    mode: InputMode,
    rng: &mut dyn RngCore,
) -> Result<usize> {
    match mode {
        InputMode::Weight => Ok(categorical_draw(&output.final_system.norm_weights, rng)),
        InputMode::Likelihood => {
            let joint = output.final_system.log_joint.as_ref().ok_or_else(|| {
                Error::invalid("log_joint", "likelihood draws need a tracked joint")
            })?;
            let (weights, _) = log_normalize(joint)?;
            Ok(categorical_draw(&weights, rng))
        }
    }
}

/// Conditional sweep returning only the sampled trajectory.
pub fn csmc_kernel(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    config: &FilterConfig,
    reference: &[f64],
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    csmc_sweep(model, observations, config, reference, rng).map(|(trajectory, _)| trajectory)
}

/// Draws one trajectory from a finished run by sampling the final weights
/// and walking the genealogy backwards.
pub fn draw_trajectory(output: &FilterOutput, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let index = categorical_draw(&output.final_system.norm_weights, rng);
    extract_trajectory(&output.genealogy, &output.stored_states, index)
}

fn run_filter(
    model: &dyn StateSpaceModel,
    observations: &[f64],
    config: &FilterConfig,
    reference: Option<&[f64]>,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    config.validate()?;
    if observations.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = observations.iter().enumerate().find(|(_, y)| !y.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    if let Some(reference) = reference {
        if reference.len() != observations.len() {
            return Err(Error::LengthMismatch {
                left: reference.len(),
                right: observations.len(),
            });
        }
    }

    let particles = config.particles;
    let steps = observations.len();
    let threshold = config.ess_threshold_fraction * particles as f64;
    let conditioned = particles - 1;

    let mut states: Vec<f64> = (0..particles).map(|_| model.sample_initial(rng)).collect();
    if let Some(reference) = reference {
        states[conditioned] = reference[0];
    }

    let mut carried_log: Vec<f64> = if reference.is_some() {
        vec![0.0; particles]
    } else {
        states
            .iter()
            .map(|&x| model.emission_log_density(observations[0], x, 1))
            .collect()
    };
    let mut log_joint: Option<Vec<f64>> = if config.track_likelihood {
        Some(
            states
                .iter()
                .map(|&x| {
                    model.initial_log_density(x) + model.emission_log_density(observations[0], x, 1)
                })
                .collect(),
        )
    } else {
        None
    };

    let (mut norm_weights, log_total) =
        log_normalize(&carried_log).map_err(|error| collapse_at(error, 1))?;
    for weight in carried_log.iter_mut() {
        *weight -= log_total;
    }

    let mut stored_states = vec![states.clone()];
    let mut weight_history = vec![norm_weights.clone()];
    let mut ess_history = vec![ess(&norm_weights)];
    let mut ancestor_history: Vec<Vec<usize>> = vec![(0..particles).collect()];
    let mut resample_flags = vec![false];

    for n in 2..=steps {
        let fire = ess_history[n - 2] < threshold;
        let ancestors: Vec<usize> = if fire {
            let mut row = match config.scheme.mode() {
                InputMode::Weight => {
                    let input = SelectionInput::log_weights(&carried_log);
                    select_ancestors(config.scheme, &input, particles, rng)?
                }
                InputMode::Likelihood => {
                    let joint = log_joint
                        .as_ref()
                        .expect("likelihood-mode configs always track the joint");
                    let input = SelectionInput::log_likelihoods(joint);
                    select_ancestors(config.scheme, &input, particles, rng)?
                }
            };
            if reference.is_some() {
                pin_conditioned_slot(&mut row, particles, config.scheme.is_deterministic());
            }
            for weight in carried_log.iter_mut() {
                *weight = 0.0;
            }
            row
        } else {
            (0..particles).collect()
        };

        let y = observations[n - 1];
        let mut next: Vec<f64> = ancestors
            .iter()
            .map(|&parent| model.sample_transition(states[parent], n, rng))
            .collect();
        if let Some(reference) = reference {
            next[conditioned] = reference[n - 1];
        }

        let emissions: Vec<f64> = next
            .iter()
            .map(|&x| model.emission_log_density(y, x, n))
            .collect();
        for (weight, &emission) in carried_log.iter_mut().zip(&emissions) {
            *weight += emission;
        }
        if let Some(joint) = log_joint.as_mut() {
            *joint = (0..particles)
                .map(|s| {
                    emissions[s]
                        + model.transition_log_density(next[s], states[ancestors[s]], n)
                        + joint[ancestors[s]]
                })
                .collect();
        }

        let (normalized, log_total) =
            log_normalize(&carried_log).map_err(|error| collapse_at(error, n))?;
        for weight in carried_log.iter_mut() {
            *weight -= log_total;
        }
        norm_weights = normalized;

        states = next;
        stored_states.push(states.clone());
        weight_history.push(norm_weights.clone());
        ess_history.push(ess(&norm_weights));
        ancestor_history.push(ancestors);
        resample_flags.push(fire);
    }

    let genealogy = Genealogy {
        ancestors: ancestor_history,
        resample_flags,
    };
    let final_system = ParticleSystem::new(states, carried_log, norm_weights, log_joint)?;
    Ok(FilterOutput {
        final_system,
        genealogy,
        stored_states,
        weight_history,
        ess_history,
    })
}

/// Forces the conditioned slot to descend from itself.
///
/// Stochastic ancestor rows simply overwrite the last slot. Deterministic
/// schemes hand out exact multiplicities, so overwriting would silently drop
/// an offspring of whichever particle happened to occupy the slot; instead
/// one copy is taken from the most-multiplied particle (lowest index on
/// ties) and given to the conditioned one, keeping the total at `S`.
fn pin_conditioned_slot(ancestors: &mut Vec<usize>, particles: usize, deterministic: bool) {
    let conditioned = particles - 1;
    if ancestors[conditioned] == conditioned {
        return;
    }
    if deterministic {
        let mut counts = vec![0usize; particles];
        for &parent in ancestors.iter() {
            counts[parent] += 1;
        }
        let mut most = 0;
        for (index, &count) in counts.iter().enumerate() {
            if count > counts[most] {
                most = index;
            }
        }
        let position = ancestors
            .iter()
            .position(|&parent| parent == most)
            .expect("the most-multiplied particle appears in the expansion");
        ancestors.remove(position);
        ancestors.push(conditioned);
    } else {
        ancestors[conditioned] = conditioned;
    }
}

fn collapse_at(error: Error, step: usize) -> Error {
    match error {
        Error::ZeroWeightSum => Error::ParticleCollapse { step },
        other => other,
    }
}
