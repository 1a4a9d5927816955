use rand::Rng;

use super::block::{axpy_slice, dot, norm2, ColsRef, DenseBlock};
use crate::error::{Error, Result};
use crate::rng::gaussian_vec;
use crate::UNIT_ROUNDOFF;

/// How many fresh random vectors a broken-down column may try before giving up.
const REPLACEMENT_ATTEMPTS: usize = 8;

#[derive(Debug, Clone)]
pub struct QrResult {
    pub q: DenseBlock,
    pub r: DenseBlock,
    /// Columns that fell below the breakdown threshold and were replaced by
    /// random directions. Their `r` columns are zero.
    pub replaced_columns: Vec<usize>,
}

/// Two-pass classical Gram-Schmidt QR of `x`, optionally projected against
/// the orthonormal columns of `against` first.
///
/// A column whose projected norm drops below `n·u·(‖x_j‖ + 1)` is treated as
/// a breakdown: it is replaced by a Gaussian vector drawn from `rng`,
/// orthogonalized the same way, and its index recorded.
pub fn block_qr<R: Rng + ?Sized>(
    x: &DenseBlock,
    against: Option<ColsRef<'_>>,
    rng: &mut R,
) -> Result<QrResult> {
    let (n, d) = x.shape();
    if n < d {
        return Err(Error::DimensionMismatch(format!(
            "QR of a {n}x{d} block needs at least as many rows as columns"
        )));
    }
    if let Some(z) = against {
        if z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "orthogonalizing {n}-row block against {}-row basis",
                z.nrows()
            )));
        }
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("QR input"));
    }

    let mut q = DenseBlock::zeros(n, d);
    let mut r = DenseBlock::zeros(d, d);
    let mut replaced = Vec::new();
    let threshold_scale = n as f64 * UNIT_ROUNDOFF;

    for j in 0..d {
        let mut v = x.col(j).to_vec();
        let original = norm2(&v);
        let coeffs = project_out(&mut v, against, &q, j);
        let nu = norm2(&v);
        if nu > threshold_scale * (original + 1.0) {
            for (i, c) in coeffs.iter().enumerate() {
                r[(i, j)] = *c;
            }
            r[(j, j)] = nu;
            v.iter_mut().for_each(|e| *e /= nu);
            q.col_mut(j).copy_from_slice(&v);
            continue;
        }

        replaced.push(j);
        let mut accepted = false;
        for _ in 0..REPLACEMENT_ATTEMPTS {
            let mut g = gaussian_vec(rng, n);
            let g_norm = norm2(&g);
            project_out(&mut g, against, &q, j);
            let nu = norm2(&g);
            // A random vector keeps most of its norm unless the remaining
            // space is (numerically) empty.
            if nu > 1e-3 * g_norm {
                g.iter_mut().for_each(|e| *e /= nu);
                q.col_mut(j).copy_from_slice(&g);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::BreakdownExhausted);
        }
    }

    Ok(QrResult {
        q,
        r,
        replaced_columns: replaced,
    })
}

/// Removes from `v` its components along `against` and the first `j`
/// columns of `q`, twice. Returns the accumulated coefficients along `q`.
fn project_out(v: &mut [f64], against: Option<ColsRef<'_>>, q: &DenseBlock, j: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; j];
    for _pass in 0..2 {
        if let Some(z) = against {
            let c: Vec<f64> = (0..z.ncols()).map(|k| dot(z.col(k), v)).collect();
            for (k, ck) in c.iter().enumerate() {
                axpy_slice(v, -ck, z.col(k));
            }
        }
        let c: Vec<f64> = (0..j).map(|k| dot(q.col(k), v)).collect();
        for (k, ck) in c.iter().enumerate() {
            axpy_slice(v, -ck, q.col(k));
            coeffs[k] += ck;
        }
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_block, stream, Stream};
    use proptest::prelude::*;

    fn rng() -> rand_chacha::ChaCha8Rng {
        stream(7, Stream::Breakdown)
    }

    #[test]
    fn orthonormal_input_is_untouched() {
        let x = DenseBlock::identity(4).cols_owned(0..3);
        let out = block_qr(&x, None, &mut rng()).unwrap();
        assert!(out.q.sub(&x).max_abs() < 1e-15);
        assert!(out.r.sub(&DenseBlock::identity(3)).max_abs() < 1e-15);
        assert!(out.replaced_columns.is_empty());
    }

    #[test]
    fn duplicate_column_is_replaced() {
        let e1 = DenseBlock::unit(5, 0);
        let mut x = e1.clone();
        x.push_cols(e1.view());
        let out = block_qr(&x, None, &mut rng()).unwrap();
        assert_eq!(out.replaced_columns, vec![1]);
        assert!(out.q.orthonormality_error() < 1e-14);
        assert!(out.r.col(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_block_reconstructs() {
        let x = gaussian_block(&mut stream(3, Stream::StartBlock), 40, 5);
        let out = block_qr(&x, None, &mut rng()).unwrap();
        assert!(out.q.orthonormality_error() < 1e-12);
        assert!(out.q.matmul(&out.r).sub(&x).max_abs() < 1e-12 * x.max_abs());
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(out.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn projects_against_basis() {
        let mut g = stream(11, Stream::StartBlock);
        let z = block_qr(&gaussian_block(&mut g, 30, 6), None, &mut rng()).unwrap().q;
        let x = gaussian_block(&mut g, 30, 3);
        let out = block_qr(&x, Some(z.view()), &mut rng()).unwrap();
        assert!(z.tr_matmul(&out.q).max_abs() < 1e-14);
        assert!(out.q.orthonormality_error() < 1e-14);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let x = DenseBlock::zeros(2, 3);
        assert!(block_qr(&x, None, &mut rng()).is_err());
    }

    #[test]
    fn full_space_breakdown_exhausts() {
        let z = DenseBlock::identity(3);
        let x = DenseBlock::unit(3, 1);
        assert!(matches!(
            block_qr(&x, Some(z.view()), &mut rng()),
            Err(Error::BreakdownExhausted)
        ));
    }

    proptest! {
        #[test]
        fn rank_deficient_blocks_still_give_orthonormal_q(
            seed in 0u64..10_000,
            n in 8usize..40,
            d in 2usize..7,
            rank in 0usize..3,
        ) {
            let mut g = stream(seed, Stream::StartBlock);
            let rank = rank.min(d - 1);
            let basis = gaussian_block(&mut g, n, rank.max(1));
            let coeffs = gaussian_block(&mut g, rank.max(1), d);
            let mut x = basis.matmul(&coeffs);
            if rank == 0 {
                x.scale(0.0);
            }
            let out = block_qr(&x, None, &mut stream(seed, Stream::Breakdown)).unwrap();
            prop_assert!(out.q.orthonormality_error() <= 1e-10);
            if rank == 0 {
                prop_assert_eq!(out.replaced_columns.len(), d);
            }
        }
    }
}
