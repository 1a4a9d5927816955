use rayon::prelude::*;

use super::parallel_enabled;
use crate::dense::DenseBlock;
use crate::error::{Error, Result};

/// Work (nonzeros × block columns) below which block products stay on the
/// calling thread.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// Compressed sparse row matrix with sorted, duplicate-free rows and no
/// stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries. Duplicates are
    /// summed and entries that sum to zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(row, col, v) in entries {
            if row >= nrows || col >= ncols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("triplet value"));
            }
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(row, _, _) in entries {
            counts[row + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // Bucket by row, keeping input order within a row so summation of
        // duplicates is deterministic.
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); entries.len()];
        for &(row, col, v) in entries {
            bucket[next[row]] = (col, v);
            next[row] += 1;
        }

        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        for i in 0..nrows {
            let row = &mut bucket[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == col {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_indices.push(col);
                    values.push(sum);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Validates raw CSR arrays.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 || row_offsets[0] != 0 {
            return Err(Error::InvalidStructure("row offsets length or origin".into()));
        }
        if row_offsets[nrows] != col_indices.len() || col_indices.len() != values.len() {
            return Err(Error::InvalidStructure("row offsets do not cover the entries".into()));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidStructure(format!("row {i} offsets decrease")));
            }
            let cols = &col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!(
                    "row {i} columns not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(Error::IndexOutOfRange {
                        row: i,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("CSR values"));
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let entries: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), diag.len(), &entries).expect("diagonal indices are valid")
    }

    pub fn from_dense(m: &DenseBlock) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &entries).expect("dense indices are valid")
    }

    pub fn to_dense(&self) -> DenseBlock {
        let mut out = DenseBlock::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(i, c)] = v;
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at `(i, j)`, zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Iterates over stored `(row, col, value)` entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col_indices[next[c]] = i;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "sparse product of {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![0.0; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut pattern = Vec::new();
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if !touched[j] {
                        touched[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != 0.0 {
                    col_indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                touched[j] = false;
            }
            pattern.clear();
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// `AᵀA`, formed explicitly. Only used to build preconditioners.
    pub fn gram(&self) -> SparseMatrix {
        self.transpose()
            .matmul(self)
            .expect("AᵀA shapes always conform")
    }

    /// `AAᵀ`, formed explicitly. Only used to build preconditioners.
    pub fn outer_gram(&self) -> SparseMatrix {
        self.matmul(&self.transpose())
            .expect("AAᵀ shapes always conform")
    }

    /// Structural and numerical symmetry up to `tol · max|a_ij|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let t = self.transpose();
        let allowed = tol * scale;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = t.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (a, b) = match (ca.get(p), cb.get(q)) {
                    (Some(x), Some(y)) if x == y => {
                        p += 1;
                        q += 1;
                        (va[p - 1], vb[q - 1])
                    }
                    (Some(x), Some(y)) if x < y => {
                        p += 1;
                        (va[p - 1], 0.0)
                    }
                    (Some(_), None) => {
                        p += 1;
                        (va[p - 1], 0.0)
                    }
                    _ => {
                        q += 1;
                        (0.0, vb[q - 1])
                    }
                };
                if (a - b).abs() > allowed {
                    return false;
                }
            }
        }
        true
    }

    /// `y = A x` for a single vector.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `y = Aᵀ x` for a single vector, scattering along rows.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
    }

    /// `A X` for an `ncols × d` block.
    pub fn spmv_block(&self, x: &DenseBlock) -> Result<DenseBlock> {
        if x.nrows() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times {}-row block",
                self.nrows,
                self.ncols,
                x.nrows()
            )));
        }
        let mut out = DenseBlock::zeros(self.nrows, x.ncols());
        self.columnwise(x, &mut out, |a, xc, yc| a.matvec(xc, yc));
        Ok(out)
    }

    /// `Aᵀ X` for an `nrows × d` block.
    pub fn spmv_transpose_block(&self, x: &DenseBlock) -> Result<DenseBlock> {
        if x.nrows() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "transpose of {}x{} matrix times {}-row block",
                self.nrows,
                self.ncols,
                x.nrows()
            )));
        }
        let mut out = DenseBlock::zeros(self.ncols, x.ncols());
        self.columnwise(x, &mut out, |a, xc, yc| a.matvec_transpose(xc, yc));
        Ok(out)
    }

    /// Applies `kernel` to each column pair. Every column is computed by a
    /// single thread in a fixed order, so results do not depend on the
    /// thread count.
    fn columnwise<F>(&self, x: &DenseBlock, out: &mut DenseBlock, kernel: F)
    where
        F: Fn(&SparseMatrix, &[f64], &mut [f64]) + Sync,
    {
        let in_rows = x.nrows();
        let out_rows = out.nrows();
        if out_rows == 0 || x.ncols() == 0 {
            return;
        }
        let parallel = parallel_enabled()
            && x.ncols() > 1
            && self.nnz().saturating_mul(x.ncols()) >= PARALLEL_WORK_THRESHOLD;
        let xs = x.as_slice();
        if parallel {
            out.as_mut_slice()
                .par_chunks_mut(out_rows)
                .enumerate()
                .for_each(|(j, yc)| kernel(self, &xs[j * in_rows..(j + 1) * in_rows], yc));
        } else {
            for (j, yc) in out.as_mut_slice().chunks_mut(out_rows).enumerate() {
                kernel(self, &xs[j * in_rows..(j + 1) * in_rows], yc);
            }
        }
    }
}
