//! Incomplete Cholesky with drop tolerance, plus the inner and outer
//! preconditioned operators built on it.
//!
//! The factorization is left-looking on `Ã = A + diagcomp·diag(A)`. A
//! computed entry `l_ij` is dropped when `|l_ij| < droptol·‖Ã(:,j)‖₁`, which
//! approximates the usual threshold-ICT semantics. Non-positive pivots are
//! repaired rather than aborting, since the Laplacians this is meant for are
//! singular. No fill-reducing ordering is applied.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dense::DenseBlock;
use crate::error::{Error, Result};
use crate::rng::{stream, uniform_vec, Stream};
use crate::sparse::{OperatorMode, PerturbedOperator, SparseMatrix};
use crate::UNIT_ROUNDOFF;

pub const DEFAULT_DROPTOL: f64 = 1e-3;
pub const DEFAULT_DIAGCOMP: f64 = 0.1;

/// Lower-triangular factor `L` with `L Lᵀ ≈ A`.
#[derive(Debug, Clone)]
pub struct IctFactor {
    l: SparseMatrix,
    droptol: f64,
    diagcomp: f64,
    repairs: usize,
}

impl IctFactor {
    /// Wraps an existing lower-triangular matrix with a positive diagonal.
    pub fn from_lower(l: SparseMatrix) -> Result<Self> {
        if l.nrows() != l.ncols() {
            return Err(Error::DimensionMismatch("factor must be square".into()));
        }
        for i in 0..l.nrows() {
            let (cols, vals) = l.row(i);
            match cols.last() {
                Some(&c) if c == i && vals[vals.len() - 1] > 0.0 => {}
                Some(&c) if c > i => {
                    return Err(Error::InvalidStructure(format!(
                        "entry above the diagonal in row {i}"
                    )))
                }
                _ => return Err(Error::ZeroPivot(i)),
            }
        }
        Ok(IctFactor {
            l,
            droptol: 0.0,
            diagcomp: 0.0,
            repairs: 0,
        })
    }

    pub fn l(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn droptol(&self) -> f64 {
        self.droptol
    }

    pub fn diagcomp(&self) -> f64 {
        self.diagcomp
    }

    /// Number of pivots that were non-positive and replaced.
    pub fn repairs(&self) -> usize {
        self.repairs
    }

    /// `L⁻¹ X`.
    pub fn solve_lower(&self, x: &DenseBlock) -> Result<DenseBlock> {
        self.solve(x, forward)
    }

    /// `L⁻ᵀ X`.
    pub fn solve_upper(&self, x: &DenseBlock) -> Result<DenseBlock> {
        self.solve(x, backward)
    }

    fn solve<F>(&self, x: &DenseBlock, kernel: F) -> Result<DenseBlock>
    where
        F: Fn(&SparseMatrix, &mut [f64]) + Sync,
    {
        let n = self.dim();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "triangular solve of dimension {n} on {}-row block",
                x.nrows()
            )));
        }
        let mut out = x.clone();
        if n == 0 {
            return Ok(out);
        }
        if crate::sparse::parallel_enabled() && x.ncols() > 1 {
            out.as_mut_slice()
                .par_chunks_mut(n)
                .for_each(|col| kernel(&self.l, col));
        } else {
            for col in out.as_mut_slice().chunks_mut(n) {
                kernel(&self.l, col);
            }
        }
        Ok(out)
    }
}

fn forward(l: &SparseMatrix, x: &mut [f64]) {
    for i in 0..x.len() {
        let (cols, vals) = l.row(i);
        let last = cols.len() - 1;
        let mut s = x[i];
        for k in 0..last {
            s -= vals[k] * x[cols[k]];
        }
        x[i] = s / vals[last];
    }
}

fn backward(l: &SparseMatrix, x: &mut [f64]) {
    for i in (0..x.len()).rev() {
        let (cols, vals) = l.row(i);
        let last = cols.len() - 1;
        let yi = x[i] / vals[last];
        x[i] = yi;
        for k in 0..last {
            x[cols[k]] -= vals[k] * yi;
        }
    }
}

/// Incomplete Cholesky factorization of a symmetric (semi)definite `a`.
pub fn ict_factorize(a: &SparseMatrix, droptol: f64, diagcomp: f64) -> Result<IctFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "incomplete Cholesky of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    if !(droptol >= 0.0 && diagcomp >= 0.0) {
        return Err(Error::InvalidArgument("droptol and diagcomp must be >= 0".into()));
    }
    let diag = a.diagonal();
    if let Some(j) = diag.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroPivot(j));
    }
    let shifted: Vec<f64> = diag.iter().map(|&v| v * (1.0 + diagcomp)).collect();

    // Column j of the lower part of a symmetric matrix is row j restricted
    // to columns >= j.
    let col_norm1: Vec<f64> = (0..n)
        .map(|j| {
            let (cols, vals) = a.row(j);
            cols.iter()
                .zip(vals)
                .map(|(&c, &v)| if c == j { shifted[j].abs() } else { v.abs() })
                .sum()
        })
        .collect();

    let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    // row_links[i] lists the finished columns k < i with l_ik != 0.
    let mut row_links: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut work = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut pattern: Vec<usize> = Vec::new();
    let mut repairs = 0;

    for j in 0..n {
        let (cols, vals) = a.row(j);
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= j {
                let v = if c == j { shifted[j] } else { v };
                work[c] += v;
                if !touched[c] {
                    touched[c] = true;
                    pattern.push(c);
                }
            }
        }
        if !touched[j] {
            touched[j] = true;
            pattern.push(j);
        }
        for &(k, ljk) in &row_links[j] {
            for &(i, lik) in &columns[k] {
                if i < j {
                    continue;
                }
                work[i] -= lik * ljk;
                if !touched[i] {
                    touched[i] = true;
                    pattern.push(i);
                }
            }
        }
        let pivot = work[j];
        let ljj = if pivot > 0.0 {
            pivot.sqrt()
        } else {
            repairs += 1;
            (droptol * shifted[j] + UNIT_ROUNDOFF).sqrt()
        };
        pattern.sort_unstable();
        let threshold = droptol * col_norm1[j];
        let mut column = Vec::new();
        for &i in &pattern {
            let value = if i == j { ljj } else { work[i] / ljj };
            if i == j || (value != 0.0 && value.abs() >= threshold) {
                column.push((i, value));
                if i > j {
                    row_links[i].push((j, value));
                }
            }
            work[i] = 0.0;
            touched[i] = false;
        }
        pattern.clear();
        columns.push(column);
    }

    let triplets: Vec<_> = columns
        .iter()
        .enumerate()
        .flat_map(|(j, col)| col.iter().map(move |&(i, v)| (i, j, v)))
        .collect();
    let l = SparseMatrix::from_triplets(n, n, &triplets)?;
    Ok(IctFactor {
        l,
        droptol,
        diagcomp,
        repairs,
    })
}

/// `P_R⁻¹ AᵀA P_R⁻ᵀ + εD` with `factor ≈ chol(AᵀA)`.
pub fn wrap_outer(
    a: Arc<SparseMatrix>,
    factor: Arc<IctFactor>,
    epsilon: f64,
    seed: u64,
) -> Result<PerturbedOperator> {
    wrap(a, factor, OperatorMode::GramOuterPrecond, epsilon, seed)
}

/// `P⁻¹ A P⁻ᵀ + εD` for square SPSD `a` with `factor ≈ chol(A)`.
pub fn wrap_outer_spsd(
    a: Arc<SparseMatrix>,
    factor: Arc<IctFactor>,
    epsilon: f64,
    seed: u64,
) -> Result<PerturbedOperator> {
    wrap(a, factor, OperatorMode::SpsdOuterPrecond, epsilon, seed)
}

/// `Aᵀ P_L⁻¹ A + εD` with `factor_m ≈ chol(AAᵀ)`.
pub fn wrap_inner(
    a: Arc<SparseMatrix>,
    factor_m: Arc<IctFactor>,
    epsilon: f64,
    seed: u64,
) -> Result<PerturbedOperator> {
    wrap(a, factor_m, OperatorMode::GramInnerPrecond, epsilon, seed)
}

fn wrap(
    a: Arc<SparseMatrix>,
    factor: Arc<IctFactor>,
    mode: OperatorMode,
    epsilon: f64,
    seed: u64,
) -> Result<PerturbedOperator> {
    let diag_d = uniform_vec(&mut stream(seed, Stream::Diagonal), a.ncols());
    PerturbedOperator::with_diagonal(a, mode, epsilon, diag_d, Some(factor))
}

/// Factor used by a preconditioned mode, built from the unperturbed matrix.
pub fn factor_for_mode(
    a: &SparseMatrix,
    mode: OperatorMode,
    droptol: f64,
    diagcomp: f64,
) -> Result<IctFactor> {
    match mode {
        OperatorMode::GramInnerPrecond => ict_factorize(&a.outer_gram(), droptol, diagcomp),
        OperatorMode::GramOuterPrecond => ict_factorize(&a.gram(), droptol, diagcomp),
        OperatorMode::SpsdOuterPrecond => ict_factorize(a, droptol, diagcomp),
        OperatorMode::Gram | OperatorMode::Spsd => Err(Error::InvalidArgument(format!(
            "mode {mode:?} takes no preconditioner"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_block, stream, Stream};
    use rand::Rng;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0));
            if i + 1 < n {
                e.push((i, i + 1, -1.0));
                e.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &e).unwrap()
    }

    fn random_spd(seed: u64, n: usize) -> SparseMatrix {
        let mut rng = stream(seed, Stream::Trial(3));
        let mut e = Vec::new();
        for _ in 0..3 * n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                let v = rng.random_range(-1.0..1.0);
                e.push((i, j, v));
                e.push((j, i, v));
            }
        }
        let base = SparseMatrix::from_triplets(n, n, &e).unwrap();
        // Diagonal dominance makes it SPD.
        let mut rowsum = vec![1.0; n];
        for (i, _, v) in base.triplets() {
            rowsum[i] += v.abs();
        }
        for (i, s) in rowsum.iter().enumerate() {
            e.push((i, i, *s));
        }
        SparseMatrix::from_triplets(n, n, &e).unwrap()
    }

    /// Plain dense Cholesky as an oracle.
    fn dense_cholesky(a: &DenseBlock) -> DenseBlock {
        let n = a.nrows();
        let mut l = DenseBlock::zeros(n, n);
        for j in 0..n {
            let mut s = a[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            l[(j, j)] = s.sqrt();
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / l[(j, j)];
            }
        }
        l
    }

    #[test]
    fn identity_and_diagonal() {
        let f = ict_factorize(&SparseMatrix::identity(4), 1e-3, 0.0).unwrap();
        assert_eq!(f.l(), &SparseMatrix::identity(4));
        let f = ict_factorize(&SparseMatrix::from_diagonal(&[4.0, 9.0]), 0.5, 0.0).unwrap();
        assert_eq!(f.l().diagonal(), vec![2.0, 3.0]);
    }

    #[test]
    fn exact_on_tridiagonal() {
        let a = tridiag(30);
        let f = ict_factorize(&a, 0.0, 0.0).unwrap();
        let l = f.l().to_dense();
        let llt = l.matmul(&l.transpose());
        assert!(llt.sub(&a.to_dense()).max_abs() < 1e-12);
        assert_eq!(f.repairs(), 0);
    }

    #[test]
    fn exact_on_random_spd_matches_dense_cholesky() {
        let a = random_spd(4, 80);
        let f = ict_factorize(&a, 0.0, 0.0).unwrap();
        let oracle = dense_cholesky(&a.to_dense());
        assert!(f.l().to_dense().sub(&oracle).max_abs() < 1e-12);
    }

    #[test]
    fn dropping_keeps_a_valid_factor() {
        let a = random_spd(5, 60);
        let f = ict_factorize(&a, 1e-1, 0.1).unwrap();
        let exact = ict_factorize(&a, 0.0, 0.1).unwrap();
        assert!(f.l().nnz() <= exact.l().nnz());
        assert!(f.l().diagonal().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn singular_laplacian_is_repaired_or_shifted() {
        // Path graph Laplacian: singular, diagonal compensation keeps it
        // factorable; without it the last pivot collapses and is repaired.
        let n = 5;
        let mut e = Vec::new();
        for i in 0..n - 1 {
            e.push((i, i + 1, -1.0));
            e.push((i + 1, i, -1.0));
            e.push((i, i, 1.0));
            e.push((i + 1, i + 1, 1.0));
        }
        let lap = SparseMatrix::from_triplets(n, n, &e).unwrap();
        assert_eq!(ict_factorize(&lap, 1e-3, 0.1).unwrap().repairs(), 0);
        let f = ict_factorize(&lap, 1e-3, 0.0).unwrap();
        assert_eq!(f.repairs(), 1);
        assert!(f.l().diagonal().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_diagonal_errors() {
        let a = SparseMatrix::from_diagonal(&[1.0, 0.0, 2.0]);
        assert!(matches!(ict_factorize(&a, 1e-3, 0.1), Err(Error::ZeroPivot(1))));
    }

    #[test]
    fn triangular_solves_round_trip() {
        let f = ict_factorize(&random_spd(6, 40), 0.0, 0.0).unwrap();
        let x = gaussian_block(&mut stream(6, Stream::StartBlock), 40, 3);
        let l = f.l().to_dense();
        let y = f.solve_lower(&x).unwrap();
        assert!(l.matmul(&y).sub(&x).max_abs() < 1e-12);
        let z = f.solve_upper(&x).unwrap();
        assert!(l.transpose().matmul(&z).sub(&x).max_abs() < 1e-12);

        let two = IctFactor::from_lower(SparseMatrix::from_diagonal(&[2.0; 3])).unwrap();
        let x = DenseBlock::from_rows(&[&[2.0], &[4.0], &[6.0]]);
        assert_eq!(two.solve_lower(&x).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        let id = IctFactor::from_lower(SparseMatrix::identity(3)).unwrap();
        assert_eq!(id.solve_upper(&x).unwrap(), x);
    }

    #[test]
    fn from_lower_rejects_bad_diagonal() {
        assert!(IctFactor::from_lower(SparseMatrix::from_diagonal(&[1.0, 0.0])).is_err());
        let upper = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(IctFactor::from_lower(upper).is_err());
    }
}
