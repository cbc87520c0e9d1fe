//! Covariance-based device-activity detection for cooperative multi-cell
//! massive MIMO.
//!
//! The crate provides:
//!
//! * [`system_model`] — reproducible synthetic multi-cell instances: base
//!   station layouts, device placement, path-loss gains, signature
//!   sequences, activity ground truth, and sample covariance matrices.
//! * [`solver_core`] — the shared numerical machinery of the detection
//!   solvers: the negative log-likelihood objective, coordinate gradients,
//!   the optimality-violation vector, and rank-one inverse maintenance.
//! * [`solvers`] — the coordinate-descent detection algorithms (exact and
//!   inexact one-dimensional subproblems, with or without active-set
//!   coordinate selection) and thresholding to binary activity.
//! * [`scaling`] — the identifiability machinery: the Kronecker lifting of
//!   the signature matrix, the LP-based consistency test, phase-diagram
//!   sweeps, a brute-force null-space-property verifier for tiny systems,
//!   and the inter-cell interference bound check.
//! * [`error_analysis`] — the asymptotic error predictor: Fisher
//!   information, sampling from the degenerate Gaussian, cone-constrained
//!   QP projection, and predicted missed-detection/false-alarm curves.
//! * [`simplex`] — a self-contained dense LP solver used by the
//!   consistency and NSP tests.

pub mod error;
pub mod error_analysis;
pub mod poly;
pub mod rng;
pub mod scaling;
pub mod simplex;
pub mod solver_core;
pub mod solvers;
pub mod system_model;

pub use error::CoreError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
