use super::block::DenseBlock;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DenseBlock,
}

/// Full symmetric eigendecomposition.
///
/// The input is symmetrized by averaging first. Householder reduction to
/// tridiagonal form is followed by implicit-shift QL iteration, after the
/// classic EISPACK `tred2`/`tql2` pair.
pub fn sym_eig(t: &DenseBlock) -> Result<EigResult> {
    let (n, nc) = t.shape();
    if n != nc {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a non-square {n}x{nc} matrix"
        )));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("symmetric eigensolver input"));
    }
    if n == 0 {
        return Ok(EigResult {
            eigenvalues: Vec::new(),
            eigenvectors: DenseBlock::zeros(0, 0),
        });
    }
    let mut v = t.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let mut eigenvectors = DenseBlock::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    Ok(EigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn tred2(v: &mut DenseBlock, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut DenseBlock, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    let max_iter = 64 * n.max(8);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::InvalidArgument(
                        "symmetric QL iteration failed to converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (ci, ci1) = two_cols(v, i, i + 1);
                    for k in 0..n {
                        let h = ci1[k];
                        ci1[k] = s * ci[k] + c * h;
                        ci[k] = c * ci[k] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn two_cols(v: &mut DenseBlock, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a < b);
    let n = v.nrows();
    let (lo, hi) = v.as_mut_slice().split_at_mut(b * n);
    (&mut lo[a * n..(a + 1) * n], &mut hi[..n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_block, stream, Stream};

    fn residual(t: &DenseBlock, eig: &EigResult) -> f64 {
        let mut lam = eig.eigenvectors.clone();
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            lam.col_mut(j).iter_mut().for_each(|v| *v *= l);
        }
        t.matmul(&eig.eigenvectors).sub(&lam).max_abs()
    }

    #[test]
    fn two_by_two() {
        let t = DenseBlock::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let eig = sym_eig(&t).unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!((eig.eigenvalues[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_sorts() {
        let t = DenseBlock::from_diagonal(&[3.0, -1.0, 2.0, 0.0]);
        let eig = sym_eig(&t).unwrap();
        assert_eq!(eig.eigenvalues, vec![-1.0, 0.0, 2.0, 3.0]);
        assert_eq!(eig.eigenvectors[(1, 0)].abs(), 1.0);
        assert_eq!(eig.eigenvectors[(0, 3)].abs(), 1.0);
    }

    #[test]
    fn random_symmetric() {
        let g = gaussian_block(&mut stream(5, Stream::StartBlock), 30, 30);
        let mut t = g.clone();
        t.axpy(1.0, &g.transpose());
        let eig = sym_eig(&t).unwrap();
        let scale = t.max_abs() * 30.0;
        assert!(residual(&t, &eig) <= 1e-12 * scale);
        assert!(eig.eigenvectors.orthonormality_error() <= 1e-12);
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn clustered_spectrum() {
        let n = 40;
        let q = crate::dense::block_qr(
            &gaussian_block(&mut stream(9, Stream::StartBlock), n, n),
            None,
            &mut stream(9, Stream::Breakdown),
        )
        .unwrap()
        .q;
        let diag: Vec<f64> = (0..n).map(|i| if i < 10 { 1e-9 * i as f64 } else { i as f64 }).collect();
        let mut qd = q.clone();
        for (j, &l) in diag.iter().enumerate() {
            qd.col_mut(j).iter_mut().for_each(|v| *v *= l);
        }
        let t = qd.matmul(&q.transpose());
        let eig = sym_eig(&t).unwrap();
        for (a, b) in eig.eigenvalues.iter().zip(&diag) {
            assert!((a - b).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let t = DenseBlock::from_rows(&[&[f64::NAN]]);
        assert!(sym_eig(&t).is_err());
    }
}
