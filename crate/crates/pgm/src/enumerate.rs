//! Brute-force inference by summing over every joint assignment.
//!
//! This is the ground truth the elimination engines are tested against. It is
//! exponential in the number of variables and refuses models above
//! [`MAX_ENUMERATION_VARIABLES`].

use crate::error::{Error, Result};
use crate::model::{Factor, GraphicalModel, MarginalTable};

pub const MAX_ENUMERATION_VARIABLES: usize = 25;

/// Exact marginals and natural-log partition function by enumeration.
///
/// Factors are multiplied in a canonical order (sorted by scope, then by the
/// bit patterns of their values) so the result does not depend on the order
/// factors were added to the model.
pub fn enumerate_joint(model: &GraphicalModel) -> Result<(MarginalTable, f64)> {
    model.ensure_valid()?;
    let n = model.num_variables();
    if n > MAX_ENUMERATION_VARIABLES {
        return Err(Error::TooManyVariables {
            n,
            max: MAX_ENUMERATION_VARIABLES,
        });
    }

    let factors = canonical_order(&model.factors);
    let mut z = 0.0f64;
    let mut true_mass = vec![0.0f64; n];
    let mut assignment = vec![false; n];

    for code in 0u64..(1u64 << n) {
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = (code >> i) & 1 == 1;
        }
        let weight = factors.iter().fold(1.0f64, |acc, f| {
            let idx = f
                .scope()
                .iter()
                .fold(0usize, |idx, &v| (idx << 1) | usize::from(assignment[v]));
            acc * f.values()[idx]
        });
        if weight == 0.0 {
            continue;
        }
        z += weight;
        for (i, &bit) in assignment.iter().enumerate() {
            if bit {
                true_mass[i] += weight;
            }
        }
    }

    if z <= 0.0 || !z.is_finite() {
        return Err(Error::ZeroPartition);
    }
    let entries = true_mass
        .into_iter()
        .map(|t| {
            let p_true = t / z;
            [1.0 - p_true, p_true]
        })
        .collect();
    Ok((MarginalTable::new(entries), z.ln()))
}

fn canonical_order(factors: &[Factor]) -> Vec<&Factor> {
    let mut sorted: Vec<&Factor> = factors.iter().collect();
    sorted.sort_by(|a, b| {
        a.scope().cmp(b.scope()).then_with(|| {
            let ab: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
            ab.cmp(&bb)
        })
    });
    sorted
}
