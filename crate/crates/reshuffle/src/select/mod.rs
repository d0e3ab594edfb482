//! Offspring selection: deterministic reshuffling schemes and stochastic
//! resampling baselines.
//!
//! Deterministic schemes map a value vector to a [`MultiplicityVector`] of
//! offspring counts; stochastic schemes draw an ancestor index list
//! directly.  Values arrive either as normalized importance weights or as
//! per-particle joint log-likelihoods, and every scheme accepts its input in
//! log space so that likelihoods far below the double-precision underflow
//! threshold remain usable.

mod kl;
mod ml;
mod oracle;
mod stochastic;
mod tv;

pub use kl::{kl_objective, kl_reshuffle};
pub use ml::ml_select;
pub use oracle::{brute_force_kl_optimum, brute_force_tv_optimum, MAX_ENUMERATION_OFFSPRING};
pub use stochastic::{multinomial_resample, stratified_resample, systematic_resample};
pub use tv::{tv_objective, tv_reshuffle};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::particle::{log_normalize, multiplicity_to_ancestors};

/// What the values handed to a selection scheme mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputMode {
    /// Normalized importance weights.
    Weight,
    /// Joint likelihoods p(x_{1:n}, y_{1:n}).
    Likelihood,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::Weight => "weight",
            InputMode::Likelihood => "likelihood",
        })
    }
}

/// Per-particle values offered to a selection scheme, in linear or log
/// space, tagged with their meaning.
///
/// Linear-space values must be strictly positive; log-space values may
/// include `-inf` (a particle that can receive no offspring) as long as one
/// entry is finite.  Weight-mode values are expected to lie on the simplex,
/// but the deterministic schemes are scale-invariant and accept any positive
/// scaling.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInput<'a> {
    values: &'a [f64],
    log_space: bool,
    mode: InputMode,
}

impl<'a> SelectionInput<'a> {
    /// Normalized importance weights in linear space.
    pub fn weights(weights: &'a [f64]) -> Self {
        Self {
            values: weights,
            log_space: false,
            mode: InputMode::Weight,
        }
    }

    /// Importance weights already mapped to log space.
    pub fn log_weights(log_weights: &'a [f64]) -> Self {
        Self {
            values: log_weights,
            log_space: true,
            mode: InputMode::Weight,
        }
    }

    /// Joint log-likelihoods log p(x_{1:n}, y_{1:n}).
    pub fn log_likelihoods(log_likelihoods: &'a [f64]) -> Self {
        Self {
            values: log_likelihoods,
            log_space: true,
            mode: InputMode::Likelihood,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    /// Values mapped to log space, validated.
    pub(crate) fn to_log(&self) -> Result<Vec<f64>> {
        if self.values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.log_space {
            if let Some((index, &value)) = self
                .values
                .iter()
                .enumerate()
                .find(|(_, v)| v.is_nan() || **v == f64::INFINITY)
            {
                return Err(Error::NonFinite { index, value });
            }
            if self.values.iter().all(|&v| v == f64::NEG_INFINITY) {
                return Err(Error::ZeroWeightSum);
            }
            Ok(self.values.to_vec())
        } else {
            for (index, &value) in self.values.iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::NonFinite { index, value });
                }
                if value <= 0.0 {
                    return Err(Error::NonPositive { index, value });
                }
            }
            Ok(self.values.iter().map(|&v| v.ln()).collect())
        }
    }

    /// Values normalized onto the simplex; log-space inputs go through
    /// log-sum-exp.
    pub(crate) fn to_simplex(&self) -> Result<Vec<f64>> {
        let log_values = self.to_log()?;
        let (weights, _) = log_normalize(&log_values)?;
        Ok(weights)
    }
}

/// Selection algorithm family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Kl,
    Tv,
    Ml,
    Stratified,
    Systematic,
    Multinomial,
}

impl SchemeKind {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, SchemeKind::Kl | SchemeKind::Tv | SchemeKind::Ml)
    }
}

/// A selection scheme: the algorithm plus the vector it consumes.
///
/// The stochastic baselines operate on weights only; the deterministic
/// schemes run in either mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SelectionScheme {
    kind: SchemeKind,
    mode: InputMode,
}

impl SelectionScheme {
    pub const KL_W: Self = Self { kind: SchemeKind::Kl, mode: InputMode::Weight };
    pub const KL_P: Self = Self { kind: SchemeKind::Kl, mode: InputMode::Likelihood };
    pub const TV_W: Self = Self { kind: SchemeKind::Tv, mode: InputMode::Weight };
    pub const TV_P: Self = Self { kind: SchemeKind::Tv, mode: InputMode::Likelihood };
    pub const ML: Self = Self { kind: SchemeKind::Ml, mode: InputMode::Likelihood };
    pub const ML_W: Self = Self { kind: SchemeKind::Ml, mode: InputMode::Weight };
    pub const STRATIFIED: Self = Self { kind: SchemeKind::Stratified, mode: InputMode::Weight };
    pub const SYSTEMATIC: Self = Self { kind: SchemeKind::Systematic, mode: InputMode::Weight };
    pub const MULTINOMIAL: Self = Self { kind: SchemeKind::Multinomial, mode: InputMode::Weight };

    pub fn new(kind: SchemeKind, mode: InputMode) -> Result<Self> {
        if !kind.is_deterministic() && mode == InputMode::Likelihood {
            return Err(Error::UnsupportedMode {
                scheme: format!("{kind:?}").to_lowercase(),
                mode: mode.to_string(),
            });
        }
        Ok(Self { kind, mode })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn is_deterministic(&self) -> bool {
        self.kind.is_deterministic()
    }

    /// Every valid scheme, in ordinal order.
    pub fn all() -> [SelectionScheme; 9] {
        [
            Self::KL_W,
            Self::KL_P,
            Self::TV_W,
            Self::TV_P,
            Self::ML,
            Self::ML_W,
            Self::STRATIFIED,
            Self::SYSTEMATIC,
            Self::MULTINOMIAL,
        ]
    }

    /// Stable one-based position in the scheme catalogue, used to derive
    /// per-scheme random streams.  Never reassigned when schemes are added.
    pub fn ordinal(&self) -> u64 {
        match (self.kind, self.mode) {
            (SchemeKind::Kl, InputMode::Weight) => 1,
            (SchemeKind::Kl, InputMode::Likelihood) => 2,
            (SchemeKind::Tv, InputMode::Weight) => 3,
            (SchemeKind::Tv, InputMode::Likelihood) => 4,
            (SchemeKind::Ml, InputMode::Likelihood) => 5,
            (SchemeKind::Ml, InputMode::Weight) => 6,
            (SchemeKind::Stratified, _) => 7,
            (SchemeKind::Systematic, _) => 8,
            (SchemeKind::Multinomial, _) => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, self.mode) {
            (SchemeKind::Kl, InputMode::Weight) => "kl_w",
            (SchemeKind::Kl, InputMode::Likelihood) => "kl_p",
            (SchemeKind::Tv, InputMode::Weight) => "tv_w",
            (SchemeKind::Tv, InputMode::Likelihood) => "tv_p",
            (SchemeKind::Ml, InputMode::Likelihood) => "ml",
            (SchemeKind::Ml, InputMode::Weight) => "ml_w",
            (SchemeKind::Stratified, _) => "stratified",
            (SchemeKind::Systematic, _) => "systematic",
            (SchemeKind::Multinomial, _) => "multinomial",
        }
    }
}

impl fmt::Display for SelectionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionScheme::all()
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

impl Serialize for SelectionScheme {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SelectionScheme {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

/// Runs a scheme and returns the ancestor index list for the next
/// generation, sorted ascending, one entry per offspring slot.
///
/// The input's mode must match the scheme's.  The stochastic baselines
/// draw exactly one offspring per particle, so they additionally require
/// `offspring` to equal the input length; only they consume randomness.
pub fn select_ancestors<R: Rng + ?Sized>(
    scheme: SelectionScheme,
    input: &SelectionInput,
    offspring: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if input.mode() != scheme.mode() {
        return Err(Error::UnsupportedMode {
            scheme: scheme.name().to_string(),
            mode: input.mode().to_string(),
        });
    }
    let fixed_size = |weights: &[f64]| {
        if offspring != weights.len() {
            return Err(Error::invalid(
                "offspring",
                format!(
                    "{} draws one offspring per particle, so {} offspring need {} weights, got {}",
                    scheme.name(),
                    offspring,
                    offspring,
                    weights.len()
                ),
            ));
        }
        Ok(())
    };
    match scheme.kind() {
        SchemeKind::Kl => Ok(multiplicity_to_ancestors(&kl_reshuffle(input, offspring)?)),
        SchemeKind::Tv => Ok(multiplicity_to_ancestors(&tv_reshuffle(input, offspring)?)),
        SchemeKind::Ml => Ok(multiplicity_to_ancestors(&ml_select(input, offspring)?)),
        SchemeKind::Stratified => {
            let weights = input.to_simplex()?;
            fixed_size(&weights)?;
            stratified_resample(&weights, rng)
        }
        SchemeKind::Systematic => {
            let weights = input.to_simplex()?;
            fixed_size(&weights)?;
            systematic_resample(&weights, rng)
        }
        SchemeKind::Multinomial => {
            let weights = input.to_simplex()?;
            fixed_size(&weights)?;
            multinomial_resample(&weights, rng)
        }
    }
}

pub(crate) fn validate_offspring(offspring: usize) -> Result<()> {
    if offspring == 0 {
        return Err(Error::invalid("offspring", "must be at least 1"));
    }
    Ok(())
}
