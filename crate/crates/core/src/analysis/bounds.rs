use super::check_dense_dim;
use crate::dense::{principal_angles, spectral_norm, sym_eig, thin_svd, DenseBlock};
use crate::error::{Error, Result};
use crate::sparse::{OperatorMode, PerturbedOperator};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// One residual inequality evaluated on a concrete problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub context: String,
    pub quantity: f64,
    pub bound: f64,
    /// `quantity ≤ bound`.
    pub satisfied: bool,
    /// False when the inequality's hypothesis fails on this problem.
    pub applicable: bool,
}

impl BoundCheck {
    fn new(context: impl Into<String>, quantity: f64, bound: f64, applicable: bool) -> Self {
        BoundCheck {
            context: context.into(),
            quantity,
            bound,
            satisfied: quantity <= bound,
            applicable,
        }
    }

    /// Satisfied, or not applicable.
    pub fn passed(&self) -> bool {
        !self.applicable || self.satisfied
    }
}

/// Worst `t` by `quantity/bound` among per-`t` checks.
fn worst(context: &str, pairs: impl Iterator<Item = (f64, f64)>, applicable: bool) -> BoundCheck {
    let (q, b) = pairs
        .max_by(|x, y| (x.0 / x.1).total_cmp(&(y.0 / y.1)))
        .unwrap_or((0.0, 0.0));
    BoundCheck::new(context, q, b, applicable)
}

/// Residual bounds for an approximate null space basis `v` of a Gram
/// operator `B = AᵀA + εD`.
///
/// `sigma_min` is the exact smallest nonzero singular value of `A`, and
/// `N = v.ncols()` is taken as the nullity. The Rayleigh-Ritz bounds are
/// evaluated on the Ritz vectors of `B` from `subspace` (the final Krylov
/// basis, say) when given, otherwise from `span(v)`. The emitted checks:
///
/// - `exact`: `‖AV_N‖ ≤ ε(σ̲²−ε)^{−1/2}` for the exact bottom-`N`
///   eigenvectors of `B`, when `ε < σ̲²/2`.
/// - `exact_weak`: the same with bound `√ε`.
/// - `returned_weak`: `‖AV‖ ≤ √ε` for `v` itself.
/// - `subspace_perturbation`: `‖AVW_t‖ ≤ ‖AV_N‖ + ‖A‖sin∠_t(V_N, V)`,
///   `W_t` the top-`t` right singular vectors of `V_Nᵀ V`, worst `t`.
/// - `ritz_linear`: `‖A V_R[:, :t]‖² ≤ λ̃_t + ε`, worst `t`.
/// - `ritz_quadratic`: `‖AV_R‖² ≤ λ̃_N + ε²/(σ̲²−λ̃_N−ε)` when
///   `ε < σ̲² − λ̃_N`.
/// - `angle_t`: `‖A V_R[:, :t]‖² ≤ (ε(σ̲²−ε)^{−1/2} + σ̄ tan∠_t)² + ε`,
///   worst `t`, when `ε < σ̲²/3`.
/// - `angle_n`: `‖AV_R‖² ≤ (ε(σ̲²−ε)^{−1/2} + σ̄ tan∠_N)² + 9ε²/(5(σ̲²−ε))`
///   when additionally `tan∠_N ≤ (2σ̲²−5ε)/(3σ̄(σ̲²−ε)^{1/2})`.
/// - `end_to_end`: `‖AV_R‖² ≤ 161ε²/(30σ̲²)` when `ε < σ̲²/3` and
///   `tan∠_N ≤ ε/(√6 σ̄σ̲)`.
///
/// Here `λ̃_t` is the `t`-th eigenvalue of `SᵀAᵀAS` for the subspace
/// basis `S` and the angles are between `V_N` and `span(S)`.
pub fn residual_bound_suite(
    op: &PerturbedOperator,
    v: &DenseBlock,
    sigma_min: f64,
    subspace: Option<&DenseBlock>,
) -> Result<Vec<BoundCheck>> {
    if op.mode() != OperatorMode::Gram {
        return Err(Error::InvalidArgument(format!(
            "residual bounds are stated for the plain Gram operator, got {:?}",
            op.mode()
        )));
    }
    let n = op.dim();
    check_dense_dim(n)?;
    let nullity = v.ncols();
    if v.nrows() != n || nullity == 0 || nullity >= n {
        return Err(Error::DimensionMismatch(format!(
            "basis {}x{} for an operator of dimension {n}",
            v.nrows(),
            nullity
        )));
    }
    if !(sigma_min > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma_min must be positive, got {sigma_min}")));
    }
    let s = subspace.unwrap_or(v);
    for basis in [v, s] {
        let err = basis.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(err));
        }
    }
    if s.nrows() != n || s.ncols() < nullity {
        return Err(Error::DimensionMismatch(format!(
            "subspace {}x{} cannot hold {nullity} Ritz vectors",
            s.nrows(),
            s.ncols()
        )));
    }

    let eps = op.epsilon();
    let s2 = sigma_min * sigma_min;
    let a = op.matrix().to_dense();
    let gram = a.tr_matmul(&a);
    let sigma_max = sym_eig(&gram)?.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let b = op.to_dense()?;
    let v_n = sym_eig(&b)?.eigenvectors.cols_owned(0..nullity);
    let norm_av = |x: &DenseBlock| spectral_norm(&a.matmul(x));

    let mut out = Vec::new();
    let exact = norm_av(&v_n);
    let small_eps = eps < s2 / 2.0;
    out.push(BoundCheck::new("exact", exact, eps / (s2 - eps).sqrt(), small_eps));
    out.push(BoundCheck::new("exact_weak", exact, eps.sqrt(), small_eps));
    out.push(BoundCheck::new("returned_weak", norm_av(v), eps.sqrt(), small_eps));

    // The top-t right singular vectors of V_NᵀV are the bottom-t ones of
    // (I − V_NV_Nᵀ)V. The latter stay well determined when the cosines
    // all round to one.
    let mut outside = v.clone();
    v_n.view().sub_matmul_from(&v_n.tr_matmul(v), &mut outside);
    let svd = thin_svd(&outside)?;
    let pairs = (1..=nullity).map(|t| {
        let w = svd.v.cols_owned(nullity - t..nullity);
        let sin = svd.singular_values[nullity - t].min(1.0);
        (norm_av(&v.matmul(&w)), exact + sigma_max * sin)
    });
    out.push(worst("subspace_perturbation", pairs, true));

    // Rayleigh-Ritz on span(S).
    let h0 = s.tr_matmul(&gram);
    let h0 = h0.matmul(s);
    let lam0 = sym_eig(&h0)?.eigenvalues;
    let hb = s.tr_matmul(&b).matmul(s);
    let ritz = s.matmul(&sym_eig(&hb)?.eigenvectors.cols_owned(0..nullity));
    let res2: Vec<f64> = (1..=nullity)
        .map(|t| norm_av(&ritz.cols_owned(0..t)).powi(2))
        .collect();
    let res_n2 = res2[nullity - 1];
    out.push(worst(
        "ritz_linear",
        (0..nullity).map(|i| (res2[i], lam0[i] + eps)),
        true,
    ));
    let lam_n = lam0[nullity - 1];
    let quad_ok = eps < s2 - lam_n;
    let quad_bound = if quad_ok { lam_n + eps * eps / (s2 - lam_n - eps) } else { f64::INFINITY };
    out.push(BoundCheck::new("ritz_quadratic", res_n2, quad_bound, quad_ok));

    let angles_s = principal_angles(&v_n, s)?;
    let tans: Vec<f64> = angles_s[..nullity].iter().map(|x| x.tan()).collect();
    let third = eps < s2 / 3.0;
    let lead = eps / (s2 - eps).abs().sqrt();
    out.push(worst(
        "angle_t",
        (0..nullity).map(|i| (res2[i], (lead + sigma_max * tans[i]).powi(2) + eps)),
        third,
    ));
    let tan_n = tans[nullity - 1];
    let cond_n = third && tan_n <= (2.0 * s2 - 5.0 * eps) / (3.0 * sigma_max * (s2 - eps).sqrt());
    let angle_n = (lead + sigma_max * tan_n).powi(2) + 9.0 * eps * eps / (5.0 * (s2 - eps));
    out.push(BoundCheck::new("angle_n", res_n2, angle_n, cond_n));
    let cond_e = third && tan_n <= eps / (6f64.sqrt() * sigma_max * sigma_min);
    out.push(BoundCheck::new("end_to_end", res_n2, 161.0 * eps * eps / (30.0 * s2), cond_e));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::block_qr;
    use crate::fixtures::{diagonal_test_matrix, planted_nullity};
    use crate::rng::{gaussian_block, stream, Stream};
    use crate::sparse::SparseMatrix;
    use std::sync::Arc;

    fn op(a: SparseMatrix, eps: f64, seed: u64) -> PerturbedOperator {
        PerturbedOperator::new(Arc::new(a), OperatorMode::Gram, eps, seed).unwrap()
    }

    fn bottom(op: &PerturbedOperator, k: usize) -> DenseBlock {
        sym_eig(&op.to_dense().unwrap()).unwrap().eigenvectors.cols_owned(0..k)
    }

    fn get<'a>(checks: &'a [BoundCheck], name: &str) -> &'a BoundCheck {
        checks.iter().find(|c| c.context == name).unwrap()
    }

    #[test]
    fn diagonal_matrix_exact_basis() {
        let o = op(diagonal_test_matrix(), 1e-4, 3);
        let v = bottom(&o, 21);
        let checks = residual_bound_suite(&o, &v, 1.0, None).unwrap();
        assert_eq!(checks.len(), 9);
        for c in &checks {
            assert!(c.applicable, "{c:?}");
            assert!(c.satisfied, "{c:?}");
        }
    }

    #[test]
    fn krylov_subspace_ritz_vectors() {
        let a = planted_nullity(60, 40, 4, 7);
        let sigma = crate::dense::thin_svd(&a.to_dense()).unwrap().singular_values[35];
        let o = op(a, 1e-3 * sigma * sigma, 7);
        let exact = bottom(&o, 4);
        // A subspace holding V_N plus random directions.
        let mut s = exact.clone();
        s.push_cols(gaussian_block(&mut stream(7, Stream::Trial(9)), 40, 6).view());
        let s = block_qr(&s, None, &mut stream(7, Stream::Breakdown)).unwrap().q;
        let checks = residual_bound_suite(&o, &exact, sigma, Some(&s)).unwrap();
        assert!(checks.iter().all(BoundCheck::passed), "{checks:?}");
        assert!(get(&checks, "end_to_end").applicable);
    }

    #[test]
    fn corrupted_basis_fails() {
        let o = op(diagonal_test_matrix(), 1e-4, 3);
        let mut v = bottom(&o, 21);
        v.col_mut(0).iter_mut().for_each(|x| *x = 0.0);
        v.col_mut(0)[100] = 1.0;
        let checks = residual_bound_suite(&o, &v, 1.0, None).unwrap();
        assert!(checks.iter().any(|c| !c.passed()));
        assert!(!get(&checks, "returned_weak").satisfied);
        assert!(!get(&checks, "end_to_end").applicable);
    }

    #[test]
    fn bounds_shrink_with_epsilon() {
        let mut last = f64::INFINITY;
        for k in 2..7 {
            let eps = 10f64.powi(-k);
            let o = op(diagonal_test_matrix(), eps, 1);
            let checks = residual_bound_suite(&o, &bottom(&o, 21), 1.0, None).unwrap();
            let e = get(&checks, "exact");
            assert!(e.bound < last && e.quantity <= e.bound);
            last = e.bound;
        }
        assert!(last < 2e-6);
    }

    #[test]
    fn large_epsilon_is_not_applicable() {
        let o = op(diagonal_test_matrix(), 0.6, 1);
        let checks = residual_bound_suite(&o, &bottom(&o, 21), 1.0, None).unwrap();
        for name in ["exact", "angle_t", "angle_n", "end_to_end"] {
            assert!(!get(&checks, name).applicable, "{name}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let o = op(diagonal_test_matrix(), 1e-4, 1);
        let v = DenseBlock::zeros(420, 2);
        assert!(matches!(residual_bound_suite(&o, &v, 1.0, None), Err(Error::NotOrthonormal(_))));
        let v = bottom(&o, 2);
        assert!(residual_bound_suite(&o, &v, 0.0, None).is_err());
        let spsd = PerturbedOperator::new(Arc::new(diagonal_test_matrix()), OperatorMode::Spsd, 1e-4, 1).unwrap();
        assert!(residual_bound_suite(&spsd, &v, 1.0, None).is_err());
    }
}
