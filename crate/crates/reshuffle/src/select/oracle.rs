//! Exhaustive reference optimizers for small populations.
//!
//! These enumerate every multiplicity vector (composition of the offspring
//! total) and evaluate the objective directly, independently of the greedy
//! and rounding implementations they are used to verify.

use crate::error::{Error, Result};
use crate::particle::MultiplicityVector;

use super::kl::kl_objective_log;
use super::{validate_offspring, SelectionInput};

/// Largest offspring total the enumerators accept; the candidate count
/// C(2S−1, S−1) grows past ninety thousand beyond it.
pub const MAX_ENUMERATION_OFFSPRING: usize = 10;

/// Exact KL-optimal multiplicities by enumerating every composition.
///
/// On objective ties returns the composition that is lexicographically
/// largest when particles are ordered by descending value, matching the
/// greedy tie rule.
pub fn brute_force_kl_optimum(
    input: &SelectionInput,
    offspring: usize,
) -> Result<MultiplicityVector> {
    let log_u = input.to_log()?;
    enumerate_best(&log_u, offspring, |candidate, sorted_log_u| {
        kl_objective_log(sorted_log_u, candidate)
    })
}

/// Exact TV-optimal multiplicities by enumerating every composition, with
/// the same tie rule as the KL enumerator.
pub fn brute_force_tv_optimum(
    input: &SelectionInput,
    offspring: usize,
) -> Result<MultiplicityVector> {
    let weights = input.to_simplex()?;
    let log_w: Vec<f64> = weights.iter().map(|&w| w.ln()).collect();
    enumerate_best(&log_w, offspring, |candidate, sorted_log_w| {
        let total = offspring as f64;
        -0.5 * sorted_log_w
            .iter()
            .zip(candidate)
            .map(|(&lw, &a)| (lw.exp() - a as f64 / total).abs())
            .sum::<f64>()
    })
}

/// Runs the enumeration in descending-value order, maximizing `objective`,
/// and maps the winner back to original particle indices.
fn enumerate_best(
    log_values: &[f64],
    offspring: usize,
    objective: impl Fn(&[usize], &[f64]) -> f64,
) -> Result<MultiplicityVector> {
    validate_offspring(offspring)?;
    if offspring > MAX_ENUMERATION_OFFSPRING {
        return Err(Error::EnumerationTooLarge {
            max: MAX_ENUMERATION_OFFSPRING,
            got: offspring,
        });
    }
    let particles = log_values.len();
    let mut order: Vec<usize> = (0..particles).collect();
    order.sort_by(|&a, &b| match log_values[b].partial_cmp(&log_values[a]) {
        Some(std::cmp::Ordering::Equal) | None => a.cmp(&b),
        Some(ordering) => ordering,
    });
    let sorted_log: Vec<f64> = order.iter().map(|&i| log_values[i]).collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_composition(offspring, particles, &mut |candidate| {
        let value = objective(candidate, &sorted_log);
        let better = match &best {
            None => true,
            Some((best_value, best_candidate)) => {
                value > *best_value || (value == *best_value && candidate > best_candidate.as_slice())
            }
        };
        if better {
            best = Some((value, candidate.to_vec()));
        }
    });

    let (_, winner) = best.expect("at least one composition exists");
    let mut counts = vec![0usize; particles];
    for (position, &original) in order.iter().enumerate() {
        counts[original] = winner[position];
    }
    MultiplicityVector::new(counts, offspring)
}

/// Calls `f` with every vector of `parts` non-negative integers summing to
/// `total`, in lexicographic order.
fn for_each_composition(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn recurse(
        buffer: &mut Vec<usize>,
        position: usize,
        remaining: usize,
        f: &mut impl FnMut(&[usize]),
    ) {
        if position + 1 == buffer.len() {
            buffer[position] = remaining;
            f(buffer);
            return;
        }
        for value in 0..=remaining {
            buffer[position] = value;
            recurse(buffer, position + 1, remaining - value, f);
        }
    }
    let mut buffer = vec![0usize; parts];
    recurse(&mut buffer, 0, total, f);
}
