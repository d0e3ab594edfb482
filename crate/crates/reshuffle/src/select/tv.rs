//! Rounding minimizer of the total variation selection objective.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::particle::MultiplicityVector;

use super::{validate_offspring, SelectionInput};

/// Offspring counts minimizing the total variation distance
/// ½ Σ_s |w_s − a_s / offspring| to the normalized weights.
///
/// Scales the simplex weights by the offspring count, keeps every floor,
/// and hands the remaining copies to the largest fractional parts, ties
/// toward the lower original index.  Every count is therefore either
/// ⌊w·S⌋ or ⌈w·S⌉, and the remainder is computed in exact integer
/// arithmetic so the counts always conserve the offspring total.
pub fn tv_reshuffle(input: &SelectionInput, offspring: usize) -> Result<MultiplicityVector> {
    validate_offspring(offspring)?;
    let weights = input.to_simplex()?;
    let particles = weights.len();

    let mut counts = Vec::with_capacity(particles);
    let mut fractional: Vec<(f64, usize)> = Vec::with_capacity(particles);
    let mut assigned = 0usize;
    for (index, &weight) in weights.iter().enumerate() {
        let scaled = weight * offspring as f64;
        let floor = scaled.floor();
        counts.push(floor as usize);
        assigned += floor as usize;
        fractional.push((scaled - floor, index));
    }

    let remainder = offspring
        .checked_sub(assigned)
        .expect("floors of simplex weights cannot exceed the offspring total");
    fractional.sort_by(|a, b| match b.0.partial_cmp(&a.0) {
        Some(Ordering::Equal) | None => a.1.cmp(&b.1),
        Some(ordering) => ordering,
    });
    for &(_, index) in fractional.iter().take(remainder) {
        counts[index] += 1;
    }
    MultiplicityVector::new(counts, offspring)
}

/// Evaluates ½ Σ_s |w_s − a_s / total| against the counts' offspring total.
pub fn tv_objective(weights: &[f64], multiplicities: &MultiplicityVector) -> Result<f64> {
    if weights.len() != multiplicities.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: multiplicities.len(),
        });
    }
    let total = multiplicities.total() as f64;
    Ok(0.5
        * weights
            .iter()
            .zip(multiplicities.counts())
            .map(|(&w, &a)| (w - a as f64 / total).abs())
            .sum::<f64>())
}
