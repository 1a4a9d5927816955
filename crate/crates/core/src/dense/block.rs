use std::ops::Range;

use crate::error::{Error, Result};

/// Column-major dense matrix.
///
/// Used for everything that is tall-and-skinny (blocks of Lanczos vectors,
/// bases) or small and square (projected matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

/// Borrowed view of a contiguous range of columns.
#[derive(Debug, Clone, Copy)]
pub struct ColsRef<'a> {
    nrows: usize,
    ncols: usize,
    data: &'a [f64],
}

impl DenseBlock {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseBlock {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = 1.0;
        }
        out
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {nrows}x{ncols} block",
                data.len()
            )));
        }
        Ok(DenseBlock { nrows, ncols, data })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        DenseBlock { nrows, ncols, data }
    }

    /// Builds a block from row slices, mostly for tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut out = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            out[(i, i)] = v;
        }
        out
    }

    /// Single column block holding the `i`-th unit vector of length `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut out = Self::zeros(n, 1);
        out.data[i] = 1.0;
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn view(&self) -> ColsRef<'_> {
        ColsRef {
            nrows: self.nrows,
            ncols: self.ncols,
            data: &self.data,
        }
    }

    pub fn cols(&self, range: Range<usize>) -> ColsRef<'_> {
        assert!(range.end <= self.ncols, "column range out of bounds");
        ColsRef {
            nrows: self.nrows,
            ncols: range.len(),
            data: &self.data[range.start * self.nrows..range.end * self.nrows],
        }
    }

    /// Owned copy of a column range.
    pub fn cols_owned(&self, range: Range<usize>) -> DenseBlock {
        self.cols(range).to_owned()
    }

    /// Owned copy of a sub-block.
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> DenseBlock {
        DenseBlock::from_fn(rows.len(), cols.len(), |i, j| {
            self[(rows.start + i, cols.start + j)]
        })
    }

    pub fn set_submatrix(&mut self, row0: usize, col0: usize, block: &DenseBlock) {
        for j in 0..block.ncols {
            for i in 0..block.nrows {
                self[(row0 + i, col0 + j)] = block[(i, j)];
            }
        }
    }

    /// Appends the columns of `other`.
    pub fn push_cols(&mut self, other: ColsRef<'_>) {
        assert_eq!(self.nrows, other.nrows, "row count mismatch in push_cols");
        self.data.extend_from_slice(other.data);
        self.ncols += other.ncols;
    }

    pub fn truncate_cols(&mut self, ncols: usize) {
        if ncols < self.ncols {
            self.data.truncate(ncols * self.nrows);
            self.ncols = ncols;
        }
    }

    /// Replaces columns `start..start + other.ncols()` with `other`.
    pub fn set_cols(&mut self, start: usize, other: &DenseBlock) {
        assert_eq!(self.nrows, other.nrows);
        let lo = start * self.nrows;
        self.data[lo..lo + other.data.len()].copy_from_slice(&other.data);
    }

    pub fn transpose(&self) -> DenseBlock {
        DenseBlock::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseBlock) -> DenseBlock {
        self.view().matmul(other)
    }

    /// `selfᵀ · other`.
    pub fn tr_matmul(&self, other: &DenseBlock) -> DenseBlock {
        self.view().tr_matmul(other.view())
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> DenseBlock {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &DenseBlock) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in axpy");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &DenseBlock) -> DenseBlock {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Average with the transpose. Square blocks only.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.nrows, self.ncols, "symmetrize needs a square block");
        let n = self.nrows;
        for j in 0..n {
            for i in j + 1..n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// `‖selfᵀself − I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.tr_matmul(self);
        let mut worst: f64 = 0.0;
        for j in 0..g.ncols {
            for i in 0..g.nrows {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Multiplies row `i` by `scales[i]`.
    pub fn scale_rows(&mut self, scales: &[f64]) {
        assert_eq!(scales.len(), self.nrows);
        for j in 0..self.ncols {
            for (v, s) in self.col_mut(j).iter_mut().zip(scales) {
                *v *= s;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseBlock {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseBlock {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

impl<'a> ColsRef<'a> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &'a [f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn to_owned(&self) -> DenseBlock {
        DenseBlock {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.to_vec(),
        }
    }

    /// `selfᵀ · other`, one dot product per entry.
    pub fn tr_matmul(&self, other: ColsRef<'_>) -> DenseBlock {
        assert_eq!(self.nrows, other.nrows, "row count mismatch in tr_matmul");
        DenseBlock::from_fn(self.ncols, other.ncols, |i, j| dot(self.col(i), other.col(j)))
    }

    /// `self · c` for a small coefficient matrix `c`.
    pub fn matmul(&self, c: &DenseBlock) -> DenseBlock {
        assert_eq!(self.ncols, c.nrows, "inner dimension mismatch in matmul");
        let mut out = DenseBlock::zeros(self.nrows, c.ncols);
        for j in 0..c.ncols {
            let dst = out.col_mut(j);
            for k in 0..self.ncols {
                let s = c[(k, j)];
                if s != 0.0 {
                    axpy_slice(dst, s, self.col(k));
                }
            }
        }
        out
    }

    /// `x −= self · c`.
    pub fn sub_matmul_from(&self, c: &DenseBlock, x: &mut DenseBlock) {
        assert_eq!(self.ncols, c.nrows);
        assert_eq!(x.nrows, self.nrows);
        for j in 0..c.ncols {
            let dst = x.col_mut(j);
            for k in 0..self.ncols {
                let s = c[(k, j)];
                if s != 0.0 {
                    axpy_slice(dst, -s, self.col(k));
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `dst += s · src`.
pub fn axpy_slice(dst: &mut [f64], s: f64, src: &[f64]) {
    for (d, v) in dst.iter_mut().zip(src) {
        *d += s * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_hand_expansion() {
        let a = DenseBlock::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let b = DenseBlock::from_rows(&[&[1.0], &[-1.0]]);
        assert_eq!(a.matmul(&b).as_slice(), &[-1.0, -1.0, -1.0]);
        let g = a.tr_matmul(&a);
        assert_eq!(g.as_slice(), &[35.0, 44.0, 44.0, 56.0]);
    }

    #[test]
    fn column_views_and_push() {
        let mut a = DenseBlock::identity(3);
        let extra = DenseBlock::from_rows(&[&[7.0], &[8.0], &[9.0]]);
        a.push_cols(extra.view());
        assert_eq!(a.ncols(), 4);
        assert_eq!(a.cols(3..4).col(0), &[7.0, 8.0, 9.0]);
        a.truncate_cols(2);
        assert_eq!(a.shape(), (3, 2));
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(DenseBlock::from_col_major(2, 2, vec![1.0; 3]).is_err());
    }
}
