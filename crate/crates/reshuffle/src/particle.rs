//! Particle populations, offspring counts, and genealogy bookkeeping.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for checking that normalized weights sum to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A weighted particle population at a single time step.
///
/// `log_weights` holds the unnormalized log weights carried by the filter,
/// `norm_weights` their normalized counterpart on the simplex.  When the
/// filter tracks joint likelihoods, `log_joint` holds the per-particle value
/// of log p(x_{1:n}, y_{1:n}).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub states: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub norm_weights: Vec<f64>,
    pub log_joint: Option<Vec<f64>>,
}

impl ParticleSystem {
    pub fn new(
        states: Vec<f64>,
        log_weights: Vec<f64>,
        norm_weights: Vec<f64>,
        log_joint: Option<Vec<f64>>,
    ) -> Result<Self> {
        let system = Self {
            states,
            log_weights,
            norm_weights,
            log_joint,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::EmptyInput);
        }
        for len in [self.log_weights.len(), self.norm_weights.len()] {
            if len != self.states.len() {
                return Err(Error::LengthMismatch {
                    left: self.states.len(),
                    right: len,
                });
            }
        }
        if let Some(lj) = &self.log_joint {
            if lj.len() != self.states.len() {
                return Err(Error::LengthMismatch {
                    left: self.states.len(),
                    right: lj.len(),
                });
            }
        }
        let sum: f64 = self.norm_weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        if let Some((index, &value)) = self
            .norm_weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::NonFinite { index, value });
        }
        Ok(())
    }
}

/// Offspring counts produced by one selection step: entry `s` is the number
/// of copies of particle `s` in the next generation.  Counts always sum to
/// the requested number of offspring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplicityVector(Vec<usize>);

impl MultiplicityVector {
    /// Wraps raw counts, checking that they sum to `offspring`.
    pub fn new(counts: Vec<usize>, offspring: usize) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let sum: usize = counts.iter().sum();
        if sum != offspring {
            return Err(Error::MultiplicitySum {
                sum,
                expected: offspring,
            });
        }
        Ok(Self(counts))
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    /// Number of particles the counts refer to.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of offspring.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

/// Expands offspring counts into a non-decreasing ancestor index list:
/// index `s` appears `counts[s]` times.
pub fn multiplicity_to_ancestors(multiplicities: &MultiplicityVector) -> Vec<usize> {
    let mut ancestors = Vec::with_capacity(multiplicities.total());
    for (s, &count) in multiplicities.counts().iter().enumerate() {
        ancestors.extend(std::iter::repeat(s).take(count));
    }
    ancestors
}

/// Ancestor bookkeeping across a full filter run.
///
/// `ancestors[n][s]` is the index at step `n - 1` of the parent of particle
/// `s` at step `n`; step 0 is the identity map.  `resample_flags[n]` records
/// whether offspring selection fired when entering step `n`; on steps where
/// it did not, `ancestors[n]` is the identity map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genealogy {
    pub ancestors: Vec<Vec<usize>>,
    pub resample_flags: Vec<bool>,
}

impl Genealogy {
    pub fn steps(&self) -> usize {
        self.ancestors.len()
    }

    pub fn particles(&self) -> usize {
        self.ancestors.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ancestors.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.resample_flags.len() != self.ancestors.len() {
            return Err(Error::LengthMismatch {
                left: self.ancestors.len(),
                right: self.resample_flags.len(),
            });
        }
        let particles = self.particles();
        for (step, row) in self.ancestors.iter().enumerate() {
            if row.len() != particles {
                return Err(Error::LengthMismatch {
                    left: particles,
                    right: row.len(),
                });
            }
            for &parent in row {
                if parent >= particles {
                    return Err(Error::IndexOutOfRange {
                        index: parent,
                        len: particles,
                    });
                }
            }
            let identity_required = step == 0 || !self.resample_flags[step];
            if identity_required && row.iter().enumerate().any(|(s, &p)| p != s) {
                return Err(Error::invalid(
                    "genealogy",
                    format!("step {step} did not resample but is not the identity map"),
                ));
            }
        }
        Ok(())
    }

    /// Number of distinct step-0 ancestors of the population alive at each
    /// step.  The sequence is non-increasing and starts at the population
    /// size; how fast it falls measures path degeneracy.
    pub fn distinct_initial_ancestors(&self) -> Vec<usize> {
        let particles = self.particles();
        let mut roots: Vec<usize> = (0..particles).collect();
        let mut counts = Vec::with_capacity(self.steps());
        let mut seen = vec![false; particles];
        for row in &self.ancestors {
            roots = row.iter().map(|&parent| roots[parent]).collect();
            seen.fill(false);
            let mut distinct = 0;
            for &root in &roots {
                if !seen[root] {
                    seen[root] = true;
                    distinct += 1;
                }
            }
            counts.push(distinct);
        }
        counts
    }
}

/// Reads one complete state trajectory out of the stored history by walking
/// the genealogy backwards from `final_index`.
pub fn extract_trajectory(
    genealogy: &Genealogy,
    stored_states: &[Vec<f64>],
    final_index: usize,
) -> Result<Vec<f64>> {
    let steps = genealogy.steps();
    if steps == 0 || stored_states.len() != steps {
        return Err(Error::LengthMismatch {
            left: steps,
            right: stored_states.len(),
        });
    }
    let particles = genealogy.particles();
    if final_index >= particles {
        return Err(Error::IndexOutOfRange {
            index: final_index,
            len: particles,
        });
    }
    let mut trajectory = vec![0.0; steps];
    let mut index = final_index;
    for step in (0..steps).rev() {
        trajectory[step] = stored_states[step][index];
        index = genealogy.ancestors[step][index];
    }
    Ok(trajectory)
}

/// Normalizes log weights, returning the simplex weights together with the
/// log of the linear-space total.
pub fn log_normalize(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    if log_weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = log_weights
        .iter()
        .enumerate()
        .find(|(_, w)| w.is_nan() || **w == f64::INFINITY)
    {
        return Err(Error::NonFinite { index, value });
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroWeightSum);
    }
    let shifted: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = shifted.iter().sum();
    let weights = shifted.iter().map(|&w| w / total).collect();
    Ok((weights, max + total.ln()))
}

/// Effective sample size 1 / Σ w² of a normalized weight vector.
///
/// Lies in [1, S]: one for a degenerate population, S for uniform weights,
/// and is invariant under permutation of the particles.
pub fn ess(weights: &[f64]) -> f64 {
    debug_assert!(!weights.is_empty());
    1.0 / weights.iter().map(|&w| w * w).sum::<f64>()
}

/// Draws one index from a categorical distribution given by normalized
/// weights, consuming a single uniform variate.
pub(crate) fn categorical_draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (index, &w) in weights.iter().enumerate() {
        cumulative += w;
        if u < cumulative {
            return index;
        }
    }
    weights.len() - 1
}
