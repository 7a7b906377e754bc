//! Factuality assessment of long-form text.
//!
//! A response is split into atomic claims, each claim is paired with
//! retrieved evidence, an LLM judges the logical relation between evidence
//! and claims, and the judgments become a binary graphical model whose
//! posterior marginals say how likely each claim is to be true.

pub mod baselines;
pub mod cache;
pub mod error;
pub mod fanout;
pub mod llm;
pub mod metrics;
pub mod mock;
pub mod model_builder;
pub mod pipeline;
pub mod prompts;
pub mod relations;
pub mod retrieval;

pub use error::{Error, Result};
