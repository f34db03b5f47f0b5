//! Spectral collaborative filtering from implicit feedback.
//!
//! The library estimates a latent-variable recommendation model without
//! iterative likelihood maximization: one pass builds the sparse pairwise
//! co-occurrence probability matrix, a truncated eigendecomposition whitens
//! it, a second pass accumulates the whitened third moment, and the robust
//! tensor power method factorizes that small tensor into the item
//! distributions and mixing weights. A third pass derives per-user
//! posteriors, after which top-tau recommendation is a mixture lookup.
//!
//! The `synth` module plants ground-truth parameters, samples data from the
//! generative process, and scores recovery error, so the estimator's
//! convergence behavior is directly testable. `baseline` carries the EM
//! comparator, `eval` the ranking metrics, and `bounds` a calculator for the
//! sample-size thresholds and error bounds of the estimator.

pub mod baseline;
pub mod bounds;
pub mod cli;
pub mod data;
pub mod eval;
pub mod model;
pub mod moments;
pub mod synth;
pub mod tensor;
pub mod whitening;

mod error;
mod linalg;

pub use error::{Error, Result};
