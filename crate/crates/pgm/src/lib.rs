//! Binary factor graphs and inference over them.
//!
//! The crate provides the model types ([`GraphicalModel`], [`Factor`]), a
//! brute-force enumeration oracle, exact variable elimination, weighted
//! mini-bucket elimination with partition-function upper bounds, and UAI
//! interchange.

pub mod enumerate;
pub mod error;
pub mod generate;
pub mod inference;
pub mod model;
pub mod order;
pub mod uai;

mod table;

#[cfg(test)]
mod fixtures;

pub use enumerate::{enumerate_joint, MAX_ENUMERATION_VARIABLES};
pub use error::{Error, Result};
pub use inference::{ve_marginals, wmb_marginals, InferenceResult, WmbConfig, MAX_EXACT_WIDTH};
pub use model::{validate_model, Factor, GraphicalModel, MarginalTable, Variable, Violation};
pub use order::{min_fill_order, EliminationOrder};
pub use uai::{read_uai, write_uai};
