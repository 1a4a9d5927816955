//! Numerical checks of the convergence theory on dense desk-scale problems.
//!
//! Everything here forms dense matrices and is meant for `n` in the low
//! hundreds, where exact spectra come from [`sym_eig`](crate::dense::sym_eig).

mod bounds;
mod krylov;
mod repulsion;
mod vandermonde;

pub use bounds::{residual_bound_suite, BoundCheck};
pub use krylov::{chebyshev_decay, krylov_angle_trace, AngleTrace};
pub use repulsion::{
    cdf_shape_check, empirical_quantile, repulsion_experiment, CdfShape, RepulsionReport, DEFAULT_LEVELS,
};
pub use vandermonde::{spectral_gap, vandermonde_bound, vandermonde_ratio};

use crate::error::{Error, Result};

/// Largest `n` the dense experiments accept.
pub const MAX_DENSE_DIM: usize = 500;

fn check_dense_dim(n: usize) -> Result<()> {
    if n > MAX_DENSE_DIM {
        return Err(Error::InvalidArgument(format!(
            "dense analysis needs n <= {MAX_DENSE_DIM}, got {n}"
        )));
    }
    Ok(())
}

/// Errors unless `eigs[..count]` is strictly increasing.
fn check_distinct(eigs: &[f64], count: usize) -> Result<()> {
    if count > eigs.len() {
        return Err(Error::InvalidArgument(format!(
            "{count} eigenvalues requested from a spectrum of {}",
            eigs.len()
        )));
    }
    if let Some(i) = (1..count).find(|&i| eigs[i] <= eigs[i - 1]) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues {} and {} are not strictly increasing",
            i,
            i + 1
        )));
    }
    Ok(())
}
