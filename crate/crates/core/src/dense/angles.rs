use super::block::DenseBlock;
use super::svd::{pinv, spectral_norm, thin_svd};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Principal angles between `range(v0)` and `range(v1)`, ascending.
///
/// Cosines are the singular values of `v0ᵀv1` and sines those of the part
/// of the smaller basis outside the larger range. Angles below π/4 come
/// from the sine, the rest from the cosine, so clustered small angles stay
/// accurate where `arccos` alone would lose half the digits.
pub fn principal_angles(v0: &DenseBlock, v1: &DenseBlock) -> Result<Vec<f64>> {
    if v0.nrows() != v1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces in R^{} and R^{}",
            v0.nrows(),
            v1.nrows()
        )));
    }
    for v in [v0, v1] {
        let err = v.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(err));
        }
    }
    // Put the smaller subspace second so every one of its directions pairs
    // with an angle.
    let (big, small) = if v1.ncols() <= v0.ncols() { (v0, v1) } else { (v1, v0) };
    let k = small.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let cross = big.tr_matmul(small);
    let cosines = thin_svd(&cross)?.singular_values;
    // Component of `small` outside range(big).
    let mut outside = small.clone();
    big.view().sub_matmul_from(&cross, &mut outside);
    let mut sines = thin_svd(&outside)?.singular_values;
    sines.reverse();

    let mut angles: Vec<f64> = (0..k)
        .map(|t| {
            let cos = cosines[t].clamp(0.0, 1.0);
            let sin = sines[t].clamp(0.0, 1.0);
            if sin * sin < 0.5 {
                sin.asin()
            } else {
                cos.acos()
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// `‖Vperpᵀ Ω (V0ᵀ Ω)^†‖`, the tangent of the largest principal angle
/// between `range(v0)` and `range(omega)`.
///
/// Fails when `V0ᵀΩ` is numerically rank deficient, in which case the
/// tangent is unbounded.
pub fn tan_angle(v0: &DenseBlock, vperp: &DenseBlock, omega: &DenseBlock) -> Result<f64> {
    let n = v0.nrows();
    if vperp.nrows() != n || omega.nrows() != n {
        return Err(Error::DimensionMismatch(
            "tan_angle inputs must share a row count".into(),
        ));
    }
    let k1 = omega.ncols();
    if k1 > v0.ncols() {
        return Err(Error::RankDeficient(format!(
            "{k1} directions cannot all meet a {}-dimensional subspace",
            v0.ncols()
        )));
    }
    let c = v0.tr_matmul(omega);
    let s = vperp.tr_matmul(omega);
    let (c_pinv, rank) = pinv(&c, 1e-13)?;
    if rank < k1 {
        return Err(Error::RankDeficient(format!(
            "V0ᵀΩ has numerical rank {rank} < {k1}"
        )));
    }
    Ok(spectral_norm(&s.matmul(&c_pinv)))
}
