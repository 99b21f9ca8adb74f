//! Sparse non-negative blind source separation.
//!
//! Factorizes non-negative data `Y ~= A S` with sparse sources `S`, using the
//! nGMCA family of algorithms (exact proximal sub-problems with a decreasing
//! threshold), alongside ALS, multiplicative-update and sparse HALS
//! baselines, synthetic data generation and an SDR-based benchmark harness.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bench;
pub mod container;
pub mod datagen;
pub mod error;
pub mod linops;
pub mod metrics;
pub mod priors;
pub mod rng;
pub mod subsolvers;

pub use error::{Error, Result};
pub use linops::RealMatrix;
