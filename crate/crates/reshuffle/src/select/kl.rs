//! Greedy maximizer of the reverse Kullback-Leibler selection objective.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::particle::MultiplicityVector;

use super::{validate_offspring, SelectionInput};

/// One heap entry: the objective gain from granting `index` one more copy.
struct Candidate {
    gain: f64,
    rank: usize,
    index: usize,
    count: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.gain.partial_cmp(&other.gain) {
            Some(Ordering::Equal) | None => other.rank.cmp(&self.rank),
            Some(ordering) => ordering,
        }
    }
}

/// Offspring counts maximizing Σ_s a_s · log(u_s / a_s) over all
/// non-negative integer vectors summing to `offspring`.
///
/// Works on the marginal gain of granting one more copy to a particle; the
/// gain is strictly decreasing in the current count, so repeatedly granting
/// the largest gain is exactly optimal.  Gains that tie bitwise are resolved
/// toward the particle with the larger value, then the lower original index,
/// which keeps the result deterministic and concentrates ties on the
/// highest-valued particles.  Runs in O(S log S); the objective itself is
/// invariant under positive scaling of the values.
pub fn kl_reshuffle(input: &SelectionInput, offspring: usize) -> Result<MultiplicityVector> {
    validate_offspring(offspring)?;
    let log_u = input.to_log()?;
    let particles = log_u.len();

    let mut order: Vec<usize> = (0..particles).collect();
    order.sort_by(|&a, &b| match log_u[b].partial_cmp(&log_u[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(ordering) => ordering,
    });
    let mut rank = vec![0usize; particles];
    for (r, &index) in order.iter().enumerate() {
        rank[index] = r;
    }

    let mut heap = BinaryHeap::with_capacity(particles);
    for index in 0..particles {
        heap.push(Candidate {
            gain: log_u[index],
            rank: rank[index],
            index,
            count: 0,
        });
    }

    let mut counts = vec![0usize; particles];
    for _ in 0..offspring {
        let mut top = heap.pop().expect("heap holds one entry per particle");
        counts[top.index] += 1;
        top.count += 1;
        top.gain = log_u[top.index] - increment_gap(top.count);
        heap.push(top);
    }
    MultiplicityVector::new(counts, offspring)
}

/// Gap between consecutive per-particle objective terms:
/// (a+1)·ln(a+1) − a·ln(a), with the 0·ln(0) = 0 convention.
fn increment_gap(count: usize) -> f64 {
    let next = (count + 1) as f64;
    if count == 0 {
        next * next.ln()
    } else {
        let current = count as f64;
        next * next.ln() - current * current.ln()
    }
}

/// Evaluates Σ_s a_s · log(u_s / a_s) with the 0 · log(·/0) = 0 convention.
pub fn kl_objective(u: &[f64], multiplicities: &MultiplicityVector) -> Result<f64> {
    if u.len() != multiplicities.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: multiplicities.len(),
        });
    }
    Ok(u.iter()
        .zip(multiplicities.counts())
        .filter(|(_, &a)| a > 0)
        .map(|(&value, &a)| {
            let copies = a as f64;
            copies * (value / copies).ln()
        })
        .sum())
}

/// Log-space objective Σ_s a_s · (log u_s − log a_s), shared with the
/// exhaustive optimizer.
pub(crate) fn kl_objective_log(log_u: &[f64], counts: &[usize]) -> f64 {
    log_u
        .iter()
        .zip(counts)
        .filter(|(_, &a)| a > 0)
        .map(|(&log_value, &a)| {
            let copies = a as f64;
            copies * (log_value - copies.ln())
        })
        .sum()
}
