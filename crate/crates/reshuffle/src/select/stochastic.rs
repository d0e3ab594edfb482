//! Stochastic resampling baselines.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for the simplex check on resampling inputs.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < 0.0 {
            return Err(Error::NonPositive { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::NotNormalized { sum });
    }
    Ok(())
}

/// Maps sorted points in [0, 1) through the weight CDF.
fn inverse_cdf_sorted(weights: &[f64], sorted_points: &[f64]) -> Vec<usize> {
    let mut ancestors = Vec::with_capacity(sorted_points.len());
    let mut index = 0;
    let mut cumulative = weights[0];
    for &point in sorted_points {
        while point >= cumulative && index + 1 < weights.len() {
            index += 1;
            cumulative += weights[index];
        }
        ancestors.push(index);
    }
    ancestors
}

/// Stratified resampling: one uniform per stratum, positions (k + ũ_k) / S.
///
/// Unbiased: particle s receives S·w_s offspring in expectation.
pub fn stratified_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    validate_weights(weights)?;
    let count = weights.len();
    let points: Vec<f64> = (0..count)
        .map(|k| (k as f64 + rng.random::<f64>()) / count as f64)
        .collect();
    Ok(inverse_cdf_sorted(weights, &points))
}

/// Systematic resampling: a single uniform offset shared by every stratum.
///
/// Unbiased, and each offspring count is ⌊S·w⌋ or ⌈S·w⌉.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    validate_weights(weights)?;
    let count = weights.len();
    let offset: f64 = rng.random();
    let points: Vec<f64> = (0..count)
        .map(|k| (k as f64 + offset) / count as f64)
        .collect();
    Ok(inverse_cdf_sorted(weights, &points))
}

/// Multinomial resampling: S independent categorical draws, returned sorted.
pub fn multinomial_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    validate_weights(weights)?;
    let count = weights.len();
    let mut points: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
    points.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
    Ok(inverse_cdf_sorted(weights, &points))
}
