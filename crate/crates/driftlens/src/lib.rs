//! Drift-corrected subspace projection for gas-sensor arrays.
//!
//! Sensor responses drift over time, so a classifier trained on early
//! (source) batches degrades on later (target) batches. This crate learns
//! linear projections that keep the two domains aligned in a low-dimensional
//! subspace and evaluates them batch-against-batch:
//!
//! - [`densela`] — dense matrices, Cholesky, a Jacobi eigensolver, and the
//!   symmetric-definite generalized eigenproblem.
//! - [`scatter`] — domain means, mean-discrepancy and class scatter matrices.
//! - [`subspace`] — PCA / LDA baselines, DRCA, and the discriminative D-DRCA
//!   fit, plus model serialization.
//! - [`classify`] — 1-NN and nearest-centroid scoring.
//! - [`dataio`] — svmlight parsing, batch-count validation, z-score
//!   normalization, synthetic two-domain fixtures.
//! - [`harness`] — single tasks, grid sweeps, batch-series reproduction, and
//!   CSV emission for projections and heatmaps.

pub mod classify;
pub mod dataio;
pub mod densela;
pub mod error;
pub mod harness;
pub mod scatter;
pub mod subspace;

pub use densela::{EigPairs, Matrix};
pub use error::{Error, Result};
pub use scatter::LabeledDataset;
pub use subspace::{HyperParams, Method, SubspaceModel};
