//! Dataset harness for running factuality assessors and reporting their
//! scores.

pub mod dataset;
pub mod experiment;
pub mod report;
