//! State estimators over filter output and the losses that score them.
//!
//! All estimators read a finished [`FilterOutput`] and answer for the
//! whole sequence given every observation, so they work on the surviving
//! trajectory ensemble: each final particle's path is traced back through
//! the genealogy and carries that particle's final normalized weight. The
//! marginal estimators reduce this ensemble step by step (weighted mean
//! for squared error, weighted median for absolute error); the trajectory
//! estimators commit to a single path (the largest final weight, or one
//! drawn categorically from the final weights).
//!
//! Losses compare an estimate against the true states and report the average
//! per time step, so sequences of different lengths stay comparable.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterOutput;
use crate::particle::{categorical_draw, extract_trajectory};

/// How to turn a particle population into one state estimate per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Trajectory of the particle with the largest final weight.
    Map,
    /// Per-step weighted median of the surviving trajectories.
    Mmae,
    /// Per-step weighted mean of the surviving trajectories.
    Mmse,
    /// Trajectory of one particle drawn from the final weights.
    Sampled,
}

impl EstimatorKind {
    /// Short lowercase name, matching the serialized form.
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Map => "map",
            EstimatorKind::Mmae => "mmae",
            EstimatorKind::Mmse => "mmse",
            EstimatorKind::Sampled => "sampled",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Loss functions evaluated per step and averaged over the sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Counts a step as an error unless the estimate lands within
    /// `threshold` of the truth; the boundary counts as a hit.
    ZeroOne { threshold: f64 },
    /// Absolute deviation.
    Absolute,
    /// Squared deviation.
    Squared,
}

/// Computes one estimate per time step from a finished filter run.
///
/// A generator is needed only for [`EstimatorKind::Sampled`], which draws
/// its trajectory index once from the final weights.
pub fn estimate(
    output: &FilterOutput,
    kind: EstimatorKind,
    rng: Option<&mut dyn RngCore>,
) -> Result<Vec<f64>> {
    match kind {
        EstimatorKind::Mmse => reduce_surviving_trajectories(output, |states, weights| {
            Ok(states.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>())
        }),
        EstimatorKind::Mmae => reduce_surviving_trajectories(output, weighted_median),
        EstimatorKind::Map => {
            let weights = &output.final_system.norm_weights;
            let mut best = 0;
            for (index, &weight) in weights.iter().enumerate() {
                if weight > weights[best] {
                    best = index;
                }
            }
            extract_trajectory(&output.genealogy, &output.stored_states, best)
        }
        EstimatorKind::Sampled => {
            let rng = rng.ok_or_else(|| {
                Error::invalid("rng", "the sampled estimator draws from the final weights")
            })?;
            let index = categorical_draw(&output.final_system.norm_weights, rng);
            extract_trajectory(&output.genealogy, &output.stored_states, index)
        }
    }
}

/// Applies a per-step reducer to the surviving trajectory ensemble.
///
/// At each step the ensemble holds the genealogy-traced ancestors of the
/// final generation, one state per final particle, weighted by that
/// particle's final normalized weight. Steps are visited backwards so each
/// lineage is resolved once.
fn reduce_surviving_trajectories(
    output: &FilterOutput,
    reduce: impl Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let weights = &output.final_system.norm_weights;
    let steps = output.stored_states.len();
    let mut indices: Vec<usize> = (0..weights.len()).collect();
    let mut estimates = vec![0.0; steps];
    for step in (0..steps).rev() {
        let states: Vec<f64> = indices
            .iter()
            .map(|&index| output.stored_states[step][index])
            .collect();
        estimates[step] = reduce(&states, weights)?;
        if step > 0 {
            for index in indices.iter_mut() {
                *index = output.genealogy.ancestors[step][*index];
            }
        }
    }
    Ok(estimates)
}

/// Smallest state whose cumulative weight, taken in ascending state order,
/// reaches one half.
pub fn weighted_median(states: &[f64], weights: &[f64]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::EmptyInput);
    }
    if states.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: states.len(),
            right: weights.len(),
        });
    }
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| states[a].partial_cmp(&states[b]).expect("states are ordered"));
    let mut cumulative = 0.0;
    for &index in &order {
        cumulative += weights[index];
        if cumulative >= 0.5 {
            return Ok(states[index]);
        }
    }
    Ok(states[*order.last().expect("states are non-empty")])
}

/// Average loss per time step between the truth and an estimate.
pub fn loss(truth: &[f64], estimate: &[f64], kind: LossKind) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: estimate.len(),
        });
    }
    if let LossKind::ZeroOne { threshold } = kind {
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(Error::invalid(
                "threshold",
                format!("must be positive, got {threshold}"),
            ));
        }
    }
    let total: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(x, x_hat)| {
            let diff = x - x_hat;
            match kind {
                LossKind::ZeroOne { threshold } => {
                    if diff.abs() <= threshold {
                        0.0
                    } else {
                        1.0
                    }
                }
                LossKind::Absolute => diff.abs(),
                LossKind::Squared => diff * diff,
            }
        })
        .sum();
    Ok(total / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{bpf, FilterConfig};
    use crate::models::{simulate, SvModel};
    use crate::particle::{Genealogy, ParticleSystem};
    use crate::rng::RngStream;
    use crate::select::SelectionScheme;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn single_step_output(states: Vec<f64>, weights: Vec<f64>) -> FilterOutput {
        let particles = states.len();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let final_system =
            ParticleSystem::new(states.clone(), log_weights, weights.clone(), None).unwrap();
        FilterOutput {
            final_system,
            genealogy: Genealogy {
                ancestors: vec![(0..particles).collect()],
                resample_flags: vec![false],
            },
            stored_states: vec![states],
            weight_history: vec![weights],
            ess_history: vec![1.0],
        }
    }

    fn two_step_output(
        stored_states: Vec<Vec<f64>>,
        ancestors: Vec<Vec<usize>>,
        final_weights: Vec<f64>,
    ) -> FilterOutput {
        let resample_flags = vec![false; ancestors.len()];
        let log_weights = final_weights.iter().map(|w| w.ln()).collect();
        let final_states = stored_states.last().unwrap().clone();
        let final_system =
            ParticleSystem::new(final_states, log_weights, final_weights.clone(), None).unwrap();
        let uniform = vec![1.0 / final_weights.len() as f64; final_weights.len()];
        FilterOutput {
            final_system,
            genealogy: Genealogy { ancestors, resample_flags },
            weight_history: vec![uniform; stored_states.len()],
            ess_history: vec![1.0; stored_states.len()],
            stored_states,
        }
    }

    #[test]
    fn mmse_is_the_weighted_mean() {
        let output = single_step_output(vec![1.0, 3.0], vec![0.5, 0.5]);
        let estimates = estimate(&output, EstimatorKind::Mmse, None).unwrap();
        assert_eq!(estimates, vec![2.0]);
    }

    #[test]
    fn marginal_estimators_follow_the_genealogy() {
        // Both final particles descend from particle 0, so the first step
        // reduces over two copies of state 0 even though particle 1 held
        // state 10 there.
        let output = two_step_output(
            vec![vec![0.0, 10.0], vec![1.0, 2.0]],
            vec![vec![0, 1], vec![0, 0]],
            vec![0.5, 0.5],
        );
        assert_eq!(
            estimate(&output, EstimatorKind::Mmse, None).unwrap(),
            vec![0.0, 1.5]
        );
        assert_eq!(
            estimate(&output, EstimatorKind::Mmae, None).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn marginal_estimators_weight_trajectories_by_final_weights() {
        let output = two_step_output(
            vec![vec![-1.0, 1.0], vec![-2.0, 2.0]],
            vec![vec![0, 1], vec![0, 1]],
            vec![0.25, 0.75],
        );
        assert_eq!(
            estimate(&output, EstimatorKind::Mmse, None).unwrap(),
            vec![0.5, 1.0]
        );
        assert_eq!(
            estimate(&output, EstimatorKind::Mmae, None).unwrap(),
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn delta_weights_collapse_every_estimator() {
        let output = single_step_output(vec![5.0, 9.0], vec![1.0, 0.0]);
        for kind in [EstimatorKind::Map, EstimatorKind::Mmae, EstimatorKind::Mmse] {
            assert_eq!(estimate(&output, kind, None).unwrap(), vec![5.0], "{kind}");
        }
        let mut rng = RngStream { seed: 40, stream_id: 0 }.rng();
        let sampled = estimate(&output, EstimatorKind::Sampled, Some(&mut rng)).unwrap();
        assert_eq!(sampled, vec![5.0]);
    }

    #[test]
    fn weighted_median_crosses_at_half() {
        assert_eq!(
            weighted_median(&[0.0, 1.0, 2.0], &[0.3, 0.4, 0.3]).unwrap(),
            1.0
        );
    }

    #[test]
    fn weighted_median_handles_unsorted_states() {
        assert_eq!(
            weighted_median(&[2.0, 0.0, 1.0], &[0.3, 0.3, 0.4]).unwrap(),
            1.0
        );
    }

    #[test]
    fn weighted_median_matches_plain_median_for_uniform_weights() {
        let mut rng = RngStream { seed: 41, stream_id: 0 }.rng();
        for _ in 0..20 {
            let states: Vec<f64> = (0..9).map(|_| rng.random_range(-5.0..5.0)).collect();
            let weights = vec![1.0 / 9.0; 9];
            let mut sorted = states.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(weighted_median(&states, &weights).unwrap(), sorted[4]);
        }
    }

    #[test]
    fn weighted_median_validates_input() {
        assert!(weighted_median(&[], &[]).is_err());
        assert!(weighted_median(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn mmse_stays_inside_the_state_range_and_ignores_particle_order() {
        let output = single_step_output(vec![-2.0, 0.5, 4.0], vec![0.2, 0.5, 0.3]);
        let permuted = single_step_output(vec![4.0, -2.0, 0.5], vec![0.3, 0.2, 0.5]);
        let a = estimate(&output, EstimatorKind::Mmse, None).unwrap();
        let b = estimate(&permuted, EstimatorKind::Mmse, None).unwrap();
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-15);
        assert!(a[0] >= -2.0 && a[0] <= 4.0);
    }

    #[test]
    fn map_reads_the_heaviest_genealogy_path() {
        let model = SvModel::new(1.0, 0.5, 0.91).unwrap();
        let mut data_rng = RngStream { seed: 42, stream_id: 0 }.rng();
        let (_, observations) = simulate(&model, 25, &mut data_rng).unwrap();
        let config = FilterConfig::new(12, SelectionScheme::SYSTEMATIC);
        let mut rng = RngStream { seed: 42, stream_id: 1 }.rng();
        let output = bpf(&model, &observations, &config, &mut rng).unwrap();

        let trajectory = estimate(&output, EstimatorKind::Map, None).unwrap();
        let weights = &output.final_system.norm_weights;
        let best = (0..weights.len())
            .max_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap())
            .unwrap();
        let expected =
            extract_trajectory(&output.genealogy, &output.stored_states, best).unwrap();
        assert_eq!(trajectory, expected);
        for (step, value) in trajectory.iter().enumerate() {
            assert!(output.stored_states[step].contains(value));
        }
    }

    #[test]
    fn sampled_estimator_requires_a_generator() {
        let output = single_step_output(vec![1.0, 2.0], vec![0.5, 0.5]);
        assert!(estimate(&output, EstimatorKind::Sampled, None).is_err());
    }

    #[test]
    fn losses_vanish_on_identical_sequences() {
        let x = vec![0.4, -1.2, 3.3];
        for kind in [
            LossKind::ZeroOne { threshold: 0.5 },
            LossKind::Absolute,
            LossKind::Squared,
        ] {
            assert_eq!(loss(&x, &x, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn losses_match_hand_computed_values() {
        let truth = vec![1.0, 2.0, 3.0];
        let shifted: Vec<f64> = truth.iter().map(|x| x + 0.4).collect();
        assert_eq!(
            loss(&truth, &shifted, LossKind::ZeroOne { threshold: 0.5 }).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            loss(&truth, &shifted, LossKind::Absolute).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            loss(&truth, &shifted, LossKind::Squared).unwrap(),
            0.16,
            epsilon = 1e-12
        );
        assert_eq!(
            loss(&[1.0, -1.0], &[0.0, 0.0], LossKind::Squared).unwrap(),
            1.0
        );
    }

    #[test]
    fn zero_one_boundary_counts_as_a_hit() {
        let result = loss(&[0.0], &[0.5], LossKind::ZeroOne { threshold: 0.5 }).unwrap();
        assert_eq!(result, 0.0);
        let outside = loss(&[0.0], &[0.5001], LossKind::ZeroOne { threshold: 0.5 }).unwrap();
        assert_eq!(outside, 1.0);
    }

    #[test]
    fn loss_validates_input() {
        assert!(loss(&[], &[], LossKind::Absolute).is_err());
        assert!(loss(&[1.0], &[1.0, 2.0], LossKind::Absolute).is_err());
        assert!(loss(&[1.0], &[1.0], LossKind::ZeroOne { threshold: 0.0 }).is_err());
        assert!(loss(&[1.0], &[1.0], LossKind::ZeroOne { threshold: -1.0 }).is_err());
    }

    #[test]
    fn estimator_names_round_trip() {
        for kind in [
            EstimatorKind::Map,
            EstimatorKind::Mmae,
            EstimatorKind::Mmse,
            EstimatorKind::Sampled,
        ] {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
            let back: EstimatorKind = serde_json::from_str(&json).unwrap();
            assert_eq!(back, kind);
        }
    }
}
