//! Bayesian multivariate regression with combined entrywise-L1 / rowwise-L2
//! shrinkage ("master predictor" regression), fit by a blocked Gibbs sampler.
//!
//! The crate provides:
//! - [`model`]: data containers, the penalization mask, the latent-state
//!   augmentation, and the exact joint log-density used as the correctness
//!   oracle for every conditional update.
//! - [`sampler`]: the five-block Gibbs sampler with deterministic parallel
//!   substreams, chain management, and convergence diagnostics.
//! - [`selection`]: credible-interval edge selection, Bayesian p-values,
//!   fractional influence scores, and master-predictor ranking.
//! - [`evaluation`]: classification/prediction metrics and canonical
//!   correlation curves.
//! - [`synthesize`]: synthetic-design generators, the recovery study harness,
//!   and runtime-scaling benchmarks.
//! - [`pipeline`]: abundance filtering, CLR transform, standardization, PCA.
//! - [`archive`]: the binary posterior-draw archive and CSV export.
//! - [`io`]: CSV matrix ingestion/serialization.

// Guards written as `!(x > 0.0)` are deliberate: unlike `x <= 0.0` they also
// reject NaN, which is exactly what validation code here wants.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod dist;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod selection;
pub mod synthesize;

pub use error::{Error, Result};
