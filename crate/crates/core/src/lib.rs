//! Null-space computation for large sparse matrices with a randomized
//! small-block Lanczos method.
//!
//! The zero eigenvalues of `AᵀA` (or of a symmetric positive semi-definite
//! `A`) are split apart by a small random diagonal shift `εD`, after which a
//! block Lanczos iteration with block size far below the nullity can resolve
//! the whole cluster. The iteration is restarted Krylov–Schur style and keeps
//! its basis semi-orthogonal with a monitored partial reorthogonalization.
//!
//! Module map:
//!
//! - [`sparse`]: CSR storage, block products and the perturbed operator.
//! - [`dense`]: small dense kernels (QR, symmetric eigensolver, SVD,
//!   Chebyshev polynomials, principal angles).
//! - [`lanczos`]: the block recurrence, restart and orthogonality monitor.
//! - [`solver`]: the end-to-end driver returning a [`solver::NullspaceResult`].
//! - [`precond`]: incomplete Cholesky preconditioning.
//! - [`analysis`]: dense verification harness for the perturbation and
//!   convergence bounds.
//! - [`mmio`] and [`graph`]: Matrix Market files and graph Laplacians.

// `!(x > 0.0)` is the NaN-rejecting comparison, used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dense;
mod error;
pub mod fixtures;
pub mod graph;
pub mod lanczos;
pub mod mmio;
pub mod precond;
pub mod rng;
pub mod solver;
pub mod sparse;

pub use dense::DenseBlock;
pub use error::{Error, Result};
pub use solver::{solve, NullspaceResult, SolverConfig};
pub use sparse::{OperatorMode, PerturbedOperator, SparseMatrix};

/// Unit roundoff of `f64`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON;
