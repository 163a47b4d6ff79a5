//! Disentangled graph neural network engine.
//!
//! Graph convolution is split into a parameter-free propagation step (`Â·H`)
//! and a learnable transformation step (`σ(H·W)`). Models are assembled from
//! these two operators in three orderings (interleaved, propagate-first,
//! transform-first), optionally with adaptive initial residual connections,
//! and trained full-batch with a small reverse-mode tape.
//!
//! Module map:
//! - [`graph`] and [`sparse`]: CSR graphs, self loops, normalization, the
//!   closed-form infinite-propagation limit.
//! - [`tensor`]: dense matrices, the autodiff tape, Adam, gradient checking.
//! - [`ops`]: propagation/transformation operators and their gated variants.
//! - [`model`]: model configurations, assembly, training.
//! - [`smoothness`]: node/graph smoothing levels.
//! - [`data`]: dataset formats, synthetic graphs, splits, perturbations.

#![forbid(unsafe_code)]

pub mod data;
pub mod error;
pub mod graph;
pub mod model;
pub mod ops;
pub mod smoothness;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{Graph, NormalizedAdjacency};
pub use tensor::{Matrix, Real};
