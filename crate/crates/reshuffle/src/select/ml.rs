//! Winner-takes-all selection.

use crate::error::Result;
use crate::particle::MultiplicityVector;

use super::{validate_offspring, SelectionInput};

/// Gives every offspring slot to the particle with the largest value, ties
/// toward the lowest index.
pub fn ml_select(input: &SelectionInput, offspring: usize) -> Result<MultiplicityVector> {
    validate_offspring(offspring)?;
    let log_u = input.to_log()?;
    let mut best = 0;
    for (index, &value) in log_u.iter().enumerate() {
        if value > log_u[best] {
            best = index;
        }
    }
    let mut counts = vec![0usize; log_u.len()];
    counts[best] = offspring;
    MultiplicityVector::new(counts, offspring)
}
