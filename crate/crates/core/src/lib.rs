//! Gaussian-process-interpolation (kriging) models for validating
//! measurement systems over many-dimensional configuration spaces.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench_oracles;
pub mod config_space;
pub mod critical_search;
pub mod confirmation;
pub mod error;
pub mod kriging;
pub mod pipeline;
pub mod sampling;
pub mod stats;
pub mod variogram;

pub use error::{Error, Result};
