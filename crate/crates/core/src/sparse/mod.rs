//! Sparse storage and the perturbed operator.

use std::sync::atomic::{AtomicBool, Ordering};

mod csr;
mod operator;

pub use csr::SparseMatrix;
pub use operator::{OperatorMode, PerturbedOperator};

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces every block product onto the calling thread.
///
/// Products are bitwise identical either way; this exists so reproducibility
/// tests and profiling runs can rule the thread pool out entirely.
pub fn set_sequential(sequential: bool) {
    SEQUENTIAL.store(sequential, Ordering::Relaxed);
}

pub(crate) fn parallel_enabled() -> bool {
    !SEQUENTIAL.load(Ordering::Relaxed)
}
