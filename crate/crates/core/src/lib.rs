//! Predicting factual errors of transformer language models from their
//! attention to constraint tokens.
//!
//! The pipeline: build constraint-satisfaction queries ([`datasets`]), run
//! them through a model and capture attention ([`tinylm`], or an external
//! exporter writing the [`trace`] format), pool attention over constraint
//! tokens ([`features`]), train sparse linear probes and baselines
//! ([`probes`]), and evaluate them under the multi-seed protocol ([`eval`]).
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f64` instantiation used by traces and the CLI.

pub mod datasets;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod pipeline;
pub mod probes;
pub mod scalar;
pub mod synthetic;
pub mod tinylm;
pub mod trace;

pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type ModelWeights = tinylm::ModelWeights<f64>;
pub type ForwardCapture = tinylm::ForwardCapture<f64>;
pub type Generation = tinylm::Generation<f64>;
