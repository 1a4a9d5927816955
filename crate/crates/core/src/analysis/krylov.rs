use super::{check_dense_dim, check_distinct};
use crate::dense::{axpy_slice, chebyshev_eval, dot, norm2, principal_angles, sym_eig, DenseBlock};
use crate::error::{Error, Result};
use crate::UNIT_ROUNDOFF;

/// Relative norm below which a new Krylov direction counts as dependent.
const KRYLOV_BREAKDOWN: f64 = 1e-10;

/// `tan∠_t(V_N, K_ℓ)` for `ℓ = t, t+1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTrace {
    pub t: usize,
    pub ells: Vec<usize>,
    pub tans: Vec<f64>,
    /// The Krylov space became invariant before `ell_max`.
    pub truncated: bool,
}

impl AngleTrace {
    /// The reference `tan∠_t(V_N, K_t)` is at most `1/√u`. Beyond that the
    /// `V_N` components of the Krylov vectors sit under round-off, the
    /// computed angle rounds towards π/2, and ratios against it mean
    /// nothing.
    pub fn is_resolved(&self) -> bool {
        self.tans.first().is_some_and(|&t| t <= 1.0 / UNIT_ROUNDOFF.sqrt())
    }

    /// `tan∠_t(V_N, K_ℓ) / tan∠_t(V_N, K_t)` per entry.
    pub fn ratios(&self) -> Vec<f64> {
        let first = self.tans.first().copied().unwrap_or(f64::NAN);
        self.tans.iter().map(|&x| x / first).collect()
    }

    /// Indices where `tan_ℓ > tan_t · chebyshev_decay(ℓ − t) + slack`.
    ///
    /// `slack` absorbs the round-off floor of the measured angle, which
    /// the decay factor eventually drops below.
    pub fn bound_violations(&self, eigs: &[f64], nullity: usize, slack: f64) -> Vec<usize> {
        let first = self.tans.first().copied().unwrap_or(0.0);
        self.ells
            .iter()
            .zip(&self.tans)
            .enumerate()
            .filter(|(_, (&ell, &tan))| tan > first * chebyshev_decay(eigs, nullity, ell - self.t) + slack)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `1 / cheb_k(1 + 2(λ_{N+1} − λ_N)/(λ_n − λ_{N+1}))` for ascending `eigs`.
pub fn chebyshev_decay(eigs: &[f64], nullity: usize, k: usize) -> f64 {
    let n = eigs.len();
    let width = eigs[n - 1] - eigs[nullity];
    if k == 0 {
        return 1.0;
    }
    if width <= 0.0 {
        return 0.0;
    }
    let x = 1.0 + 2.0 * (eigs[nullity] - eigs[nullity - 1]) / width;
    let c = chebyshev_eval(k.min(u32::MAX as usize) as u32, x);
    if c.is_finite() {
        1.0 / c
    } else {
        0.0
    }
}

/// Tangent of the `t`-th smallest principal angle between the bottom-`N`
/// eigenvectors of dense `B` and `span{ω, Bω, …, B^{ℓ−1}ω}`.
///
/// The Krylov basis is built with full two-pass Gram-Schmidt. If it
/// becomes invariant the trace stops there and `truncated` is set.
pub fn krylov_angle_trace(
    b: &DenseBlock,
    omega: &[f64],
    nullity: usize,
    t: usize,
    ell_max: usize,
) -> Result<AngleTrace> {
    let n = b.nrows();
    check_dense_dim(n)?;
    if b.ncols() != n || omega.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator {}x{} with a start vector of length {}",
            n,
            b.ncols(),
            omega.len()
        )));
    }
    if nullity == 0 || nullity >= n || t == 0 || t > nullity || ell_max < t {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= t <= N < n and ell_max >= t, got t = {t}, N = {nullity}, ell_max = {ell_max}"
        )));
    }
    let eig = sym_eig(b)?;
    check_distinct(&eig.eigenvalues, nullity + 1)?;
    let v_n = eig.eigenvectors.cols_owned(0..nullity);

    let mut q = DenseBlock::zeros(n, 0);
    let mut next = omega.to_vec();
    let mut trace = AngleTrace {
        t,
        ells: Vec::new(),
        tans: Vec::new(),
        truncated: false,
    };
    for ell in 1..=ell_max.min(n) {
        let before = norm2(&next);
        for _ in 0..2 {
            for j in 0..q.ncols() {
                let c = dot(q.col(j), &next);
                axpy_slice(&mut next, -c, q.col(j));
            }
        }
        let after = norm2(&next);
        if !(after > KRYLOV_BREAKDOWN * before) {
            trace.truncated = true;
            break;
        }
        next.iter_mut().for_each(|v| *v /= after);
        q.push_cols(DenseBlock::from_col_major(n, 1, next.clone())?.view());
        if ell >= t {
            let angles = principal_angles(&v_n, &q)?;
            trace.ells.push(ell);
            trace.tans.push(angles[t - 1].tan());
        }
        next = b.matmul(&DenseBlock::from_col_major(n, 1, next)?).into_vec();
    }
    Ok(trace)
}
