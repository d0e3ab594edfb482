//! Sequential Monte Carlo with deterministic offspring selection.
//!
//! The crate implements particle filtering where the resampling step is
//! replaced by a deterministic choice of offspring counts: either the
//! multiplicity vector maximizing a reverse Kullback-Leibler objective or
//! the one minimizing total variation distance to the weight vector.  Both
//! run in O(S log S) and admit exhaustive reference optimizers for small
//! populations.  Classical stratified, systematic, and multinomial
//! resampling are provided as baselines, along with a maximum-likelihood
//! selection that copies the single best particle.
//!
//! On top of the selection layer sit a bootstrap particle filter (plain and
//! joint-likelihood-tracking variants), a conditional SMC kernel, point
//! estimators with their losses, a particle Gibbs sampler for the
//! stochastic volatility model, and a small experiment harness with a TOML
//! configuration format and CSV outputs.

pub mod error;
pub mod estimate;
pub mod experiment;
pub mod filter;
pub mod models;
pub mod particle;
pub mod pgibbs;
pub mod rng;
pub mod select;

pub use error::{Error, Result};
