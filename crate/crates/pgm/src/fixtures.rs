//! Models shared by unit tests.

use crate::model::{Factor, GraphicalModel};

/// One atom, two contexts: C1 entails A1 (p = 0.8), C2 contradicts A1 (p = 0.9).
pub(crate) fn fig2_model() -> GraphicalModel {
    let mut m = GraphicalModel::new();
    let a = m.add_variable("A1");
    let c1 = m.add_variable("C1");
    let c2 = m.add_variable("C2");
    m.add_factor(Factor::unary(a, 0.5, 0.5).unwrap());
    m.add_factor(Factor::unary(c1, 0.01, 0.99).unwrap());
    m.add_factor(Factor::unary(c2, 0.01, 0.99).unwrap());
    m.add_factor(Factor::pairwise(c1, a, [0.8, 0.8, 0.2, 0.8]).unwrap());
    m.add_factor(Factor::pairwise(c2, a, [0.9, 0.9, 0.9, 0.1]).unwrap());
    m
}

/// Adds C3 contradicting C2 with strength `p` to the two-context model.
pub(crate) fn fig3_model(p: f64) -> GraphicalModel {
    let mut m = fig2_model();
    let c3 = m.add_variable("C3");
    m.add_factor(Factor::unary(c3, 0.01, 0.99).unwrap());
    m.add_factor(Factor::pairwise(c3, 2, [p, p, p, 1.0 - p]).unwrap());
    m
}
