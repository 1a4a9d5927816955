use std::sync::Arc;

use super::csr::SparseMatrix;
use crate::dense::{norm2, DenseBlock};
use crate::error::{Error, Result};
use crate::precond::IctFactor;
use crate::rng::{gaussian_vec, stream, uniform_vec, Stream};

/// Which product the operator applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// `AᵀA X + ε D X`.
    Gram,
    /// `A X + ε D X` for square symmetric positive semi-definite `A`.
    Spsd,
    /// `Aᵀ P_L⁻¹ A X + ε D X` with `P_L = L Lᵀ ≈ AAᵀ`.
    GramInnerPrecond,
    /// `P_R⁻¹ AᵀA P_R⁻ᵀ X + ε D X` with `P_R = L`, `L Lᵀ ≈ AᵀA`.
    GramOuterPrecond,
    /// `P⁻¹ A P⁻ᵀ X + ε D X` with `P = L`, `L Lᵀ ≈ A`.
    SpsdOuterPrecond,
}

impl OperatorMode {
    pub fn is_gram(self) -> bool {
        matches!(
            self,
            OperatorMode::Gram | OperatorMode::GramInnerPrecond | OperatorMode::GramOuterPrecond
        )
    }

    pub fn needs_preconditioner(self) -> bool {
        !matches!(self, OperatorMode::Gram | OperatorMode::Spsd)
    }

    /// True when the null space of the operator is that of `A P⁻ᵀ` rather
    /// than `A`, so bases must be mapped back through `P⁻ᵀ`.
    pub fn is_outer(self) -> bool {
        matches!(self, OperatorMode::GramOuterPrecond | OperatorMode::SpsdOuterPrecond)
    }
}

/// The fixed symmetric operator `B` the Lanczos iteration works with.
///
/// The diagonal `D` is drawn once at construction and never changes.
#[derive(Debug, Clone)]
pub struct PerturbedOperator {
    mode: OperatorMode,
    matrix: Arc<SparseMatrix>,
    epsilon: f64,
    diag_d: Vec<f64>,
    precond: Option<Arc<IctFactor>>,
}

impl PerturbedOperator {
    /// Plain Gram or SPSD operator with `D` drawn from `seed`.
    pub fn new(matrix: Arc<SparseMatrix>, mode: OperatorMode, epsilon: f64, seed: u64) -> Result<Self> {
        let n = matrix.ncols();
        let diag_d = uniform_vec(&mut stream(seed, Stream::Diagonal), n);
        Self::with_diagonal(matrix, mode, epsilon, diag_d, None)
    }

    /// Operator with an explicit diagonal and optional preconditioner.
    pub fn with_diagonal(
        matrix: Arc<SparseMatrix>,
        mode: OperatorMode,
        epsilon: f64,
        diag_d: Vec<f64>,
        precond: Option<Arc<IctFactor>>,
    ) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        let (m, n) = (matrix.nrows(), matrix.ncols());
        if diag_d.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "diagonal of length {} for an operator of dimension {n}",
                diag_d.len()
            )));
        }
        if mode.is_gram() {
            if m < n {
                return Err(Error::DimensionMismatch(format!(
                    "Gram mode needs m >= n, got {m}x{n}"
                )));
            }
        } else {
            if m != n {
                return Err(Error::DimensionMismatch(format!(
                    "SPSD mode needs a square matrix, got {m}x{n}"
                )));
            }
            if !matrix.is_symmetric(1e-12) {
                return Err(Error::NotSymmetric);
            }
        }
        match (&precond, mode.needs_preconditioner()) {
            (None, true) => return Err(Error::MissingPreconditioner(mode)),
            (Some(f), true) => {
                let expected = if mode == OperatorMode::GramInnerPrecond { m } else { n };
                if f.dim() != expected {
                    return Err(Error::DimensionMismatch(format!(
                        "preconditioner of dimension {} where {expected} is needed",
                        f.dim()
                    )));
                }
            }
            (Some(_), false) | (None, false) => {}
        }
        Ok(PerturbedOperator {
            mode,
            matrix,
            epsilon,
            diag_d,
            precond: if mode.needs_preconditioner() { precond } else { None },
        })
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn diag_d(&self) -> &[f64] {
        &self.diag_d
    }

    pub fn precond(&self) -> Option<&IctFactor> {
        self.precond.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Same matrix, mode and preconditioner with a different `ε`.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        PerturbedOperator {
            epsilon,
            ..self.clone()
        }
    }

    /// `B X`.
    pub fn apply(&self, x: &DenseBlock) -> Result<DenseBlock> {
        let mut out = self.apply_unperturbed(x)?;
        let eps = self.epsilon;
        if eps != 0.0 {
            for j in 0..x.ncols() {
                let xc = x.col(j);
                for ((o, &xv), &dv) in out.col_mut(j).iter_mut().zip(xc).zip(&self.diag_d) {
                    *o += eps * dv * xv;
                }
            }
        }
        Ok(out)
    }

    /// `B X` without the `εD` term.
    pub fn apply_unperturbed(&self, x: &DenseBlock) -> Result<DenseBlock> {
        if x.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator of dimension {} applied to {}-row block",
                self.dim(),
                x.nrows()
            )));
        }
        let a = &*self.matrix;
        match self.mode {
            OperatorMode::Gram => a.spmv_transpose_block(&a.spmv_block(x)?),
            OperatorMode::Spsd => a.spmv_block(x),
            OperatorMode::GramInnerPrecond => {
                let l = self.factor()?;
                let ax = a.spmv_block(x)?;
                let y = l.solve_upper(&l.solve_lower(&ax)?)?;
                a.spmv_transpose_block(&y)
            }
            OperatorMode::GramOuterPrecond => {
                let l = self.factor()?;
                let y = l.solve_upper(x)?;
                let aty = a.spmv_transpose_block(&a.spmv_block(&y)?)?;
                l.solve_lower(&aty)
            }
            OperatorMode::SpsdOuterPrecond => {
                let l = self.factor()?;
                let y = l.solve_upper(x)?;
                l.solve_lower(&a.spmv_block(&y)?)
            }
        }
    }

    /// Maps a basis from the preconditioned coordinates back to those of
    /// `A` (`X ↦ P⁻ᵀ X`). Identity for modes without an outer factor.
    pub fn outer_backtransform(&self, x: &DenseBlock) -> Result<DenseBlock> {
        if self.mode.is_outer() {
            self.factor()?.solve_upper(x)
        } else {
            Ok(x.clone())
        }
    }

    fn factor(&self) -> Result<&IctFactor> {
        self.precond
            .as_deref()
            .ok_or(Error::MissingPreconditioner(self.mode))
    }

    /// Dense `B`, by applying the operator to the identity. For small
    /// verification problems only.
    pub fn to_dense(&self) -> Result<DenseBlock> {
        let mut b = self.apply(&DenseBlock::identity(self.dim()))?;
        b.symmetrize();
        Ok(b)
    }

    /// Power-iteration estimate of `‖B‖` from below.
    ///
    /// Returns the Rayleigh quotient of the last iterate, which never
    /// exceeds the largest eigenvalue of a positive semi-definite `B`.
    pub fn norm_estimate(&self, iters: usize, seed: u64) -> Result<f64> {
        let n = self.dim();
        if n == 0 {
            return Ok(0.0);
        }
        let mut rng = stream(seed, Stream::NormEstimate);
        let mut x = DenseBlock::from_col_major(n, 1, gaussian_vec(&mut rng, n))?;
        let mut estimate = 0.0;
        for _ in 0..iters.max(1) {
            let nx = norm2(x.col(0));
            if nx == 0.0 {
                return Ok(0.0);
            }
            x.scale(1.0 / nx);
            let y = self.apply(&x)?;
            estimate = crate::dense::dot(x.col(0), y.col(0)).max(0.0);
            if norm2(y.col(0)) == 0.0 {
                return Ok(0.0);
            }
            x = y;
        }
        Ok(estimate)
    }
}
