//! Dense kernels for Krylov-sized matrices.

mod angles;
mod block;
mod cheb;
mod eig;
mod qr;
mod svd;

pub use angles::{principal_angles, tan_angle};
pub use block::{axpy_slice, dot, norm2, ColsRef, DenseBlock};
pub use cheb::chebyshev_eval;
pub use eig::{sym_eig, EigResult};
pub use qr::{block_qr, QrResult};
pub use svd::{pinv, spectral_norm, thin_svd, SvdResult};
