use super::block::{dot, norm2, DenseBlock};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `p × k` with `k = min(p, q)`.
    pub u: DenseBlock,
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    /// `q × k`.
    pub v: DenseBlock,
}

/// Thin SVD by one-sided Jacobi rotations.
///
/// Columns of `u` belonging to zero singular values are completed to an
/// orthonormal set, so `u` always has orthonormal columns.
pub fn thin_svd(m: &DenseBlock) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::NonFinite("SVD input"));
    }
    let (p, q) = m.shape();
    if p < q {
        let t = thin_svd(&m.transpose())?;
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let mut u = m.clone();
    let mut v = DenseBlock::identity(q);
    let tol = 2.0 * f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = dot(u.col(i), u.col(i));
                let beta = dot(u.col(j), u.col(j));
                let gamma = dot(u.col(i), u.col(j));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..q).map(|j| norm2(u.col(j))).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let smax = norms.iter().cloned().fold(0.0, f64::max);

    let mut out_u = DenseBlock::zeros(p, q);
    let mut out_v = DenseBlock::zeros(q, q);
    let mut singular_values = Vec::with_capacity(q);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        singular_values.push(s);
        out_v.col_mut(dst).copy_from_slice(v.col(src));
        if s > 0.0 && s > smax * f64::EPSILON * p as f64 {
            let col = out_u.col_mut(dst);
            for (o, x) in col.iter_mut().zip(u.col(src)) {
                *o = x / s;
            }
        } else {
            missing.push(dst);
        }
    }
    complete_columns(&mut out_u, &missing);
    Ok(SvdResult {
        u: out_u,
        singular_values,
        v: out_v,
    })
}

fn rotate(m: &mut DenseBlock, i: usize, j: usize, c: f64, s: f64) {
    let rows = m.nrows();
    for k in 0..rows {
        let a = m[(k, i)];
        let b = m[(k, j)];
        m[(k, i)] = c * a - s * b;
        m[(k, j)] = s * a + c * b;
    }
}

/// Fills the listed columns with unit directions orthogonal to the rest.
fn complete_columns(u: &mut DenseBlock, missing: &[usize]) {
    let p = u.nrows();
    let mut filled: Vec<bool> = (0..u.ncols()).map(|j| !missing.contains(&j)).collect();
    let mut candidate = 0;
    for &j in missing {
        u.col_mut(j).iter_mut().for_each(|x| *x = 0.0);
        while candidate < p {
            let mut w = vec![0.0; p];
            w[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in (0..u.ncols()).filter(|&k| filled[k]) {
                    let c = dot(u.col(k), &w);
                    for (wi, uk) in w.iter_mut().zip(u.col(k)) {
                        *wi -= c * uk;
                    }
                }
            }
            let nw = norm2(&w);
            if nw > 0.5 {
                for (o, x) in u.col_mut(j).iter_mut().zip(&w) {
                    *o = x / nw;
                }
                filled[j] = true;
                break;
            }
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseBlock) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    thin_svd(m)
        .map(|s| s.singular_values[0])
        .unwrap_or(f64::NAN)
}

/// Moore-Penrose pseudo-inverse. Singular values at or below
/// `rel_tol·σ_max` are treated as zero. Returns the inverse and the
/// numerical rank.
pub fn pinv(m: &DenseBlock, rel_tol: f64) -> Result<(DenseBlock, usize)> {
    let svd = thin_svd(m)?;
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * smax;
    let mut rank = 0;
    let (p, q) = m.shape();
    let mut out = DenseBlock::zeros(q, p);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        rank += 1;
        for j in 0..p {
            let uj = svd.u[(j, k)] / s;
            for i in 0..q {
                out[(i, j)] += svd.v[(i, k)] * uj;
            }
        }
    }
    Ok((out, rank))
}
