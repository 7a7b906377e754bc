//! Seeded random models for testing and benchmarking.

use rand::Rng;

use crate::model::{Factor, GraphicalModel};

/// A random model with `n_vars` binary variables and `n_factors` factors.
///
/// Three in four factors are pairwise over a uniformly chosen pair; the rest
/// are unary. Table entries are drawn from `(0, 1]`. Variables left without a
/// factor are marked isolated so the result always validates.
pub fn random_model<R: Rng>(rng: &mut R, n_vars: usize, n_factors: usize) -> GraphicalModel {
    assert!(n_vars >= 1, "need at least one variable");
    let mut m = GraphicalModel::new();
    for i in 0..n_vars {
        m.add_variable(format!("x{i}"));
    }
    for _ in 0..n_factors {
        let pairwise = n_vars >= 2 && rng.random_bool(0.75);
        let factor = if pairwise {
            let a = rng.random_range(0..n_vars);
            let mut b = rng.random_range(0..n_vars - 1);
            if b >= a {
                b += 1;
            }
            let values = [entry(rng), entry(rng), entry(rng), entry(rng)];
            Factor::pairwise(a, b, values)
        } else {
            let v = rng.random_range(0..n_vars);
            Factor::unary(v, entry(rng), entry(rng))
        };
        m.add_factor(factor.expect("generated factor is well formed"));
    }
    m.mark_isolated();
    m
}

fn entry<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
