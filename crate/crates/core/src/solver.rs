//! End-to-end null-space driver.
//!
//! [`solve`] perturbs the operator, runs restarted block Lanczos until the
//! count of Ritz values below `3ε` settles and the basis passes the residual
//! test, then extracts an orthonormal basis of the approximate null space.

use std::io::Write;
use std::sync::Arc;

use crate::dense::{block_qr, spectral_norm, sym_eig, DenseBlock};
use crate::error::{Error, Result};
use crate::lanczos::{LanczosState, OverlapAudit, Reorth};
use crate::precond::{factor_for_mode, DEFAULT_DIAGCOMP, DEFAULT_DROPTOL};
use crate::rng::{gaussian_block, stream, Stream};
use crate::sparse::{OperatorMode, PerturbedOperator, SparseMatrix};

/// Which product of `A` the solver works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `AᵀA + εD` for rectangular `A` with `m ≥ n`.
    Gram,
    /// `A + εD` for square symmetric positive semi-definite `A`.
    Spsd,
}

/// Incomplete Cholesky preconditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// Approximate `(AAᵀ)⁻¹` inside the Gram product. Gram mode only.
    Inner,
    /// Congruence by a factor of `AᵀA` (Gram) or `A` (SPSD).
    Outer,
}

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Block size; `None` means `max(1, dim_k / 16)`.
    pub block_size: Option<usize>,
    /// Krylov dimension at which the decomposition is restarted. Rounded up
    /// to a multiple of the block size.
    pub dim_k: usize,
    /// Threshold on `‖AV‖`; `None` means `ε`.
    pub residual_tol: Option<f64>,
    pub max_restarts: usize,
    pub seed: u64,
    pub mode: Mode,
    pub preconditioner: Preconditioner,
    pub droptol: f64,
    pub diagcomp: f64,
    pub reorth: Reorth,
    /// Run on a single thread.
    pub deterministic: bool,
    /// Record the decomposition residual and overlap bounds every cycle.
    /// Costs an extra `dim_k` operator applications per restart.
    pub audit_orthogonality: bool,
    /// Power iterations for the `‖B‖` estimate.
    pub norm_iters: usize,
    /// Relative change of the smallest unconverged Ritz value between the
    /// last two cycles below which it counts as settled.
    pub settle_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-3,
            block_size: None,
            dim_k: 128,
            residual_tol: None,
            max_restarts: 500,
            seed: 1,
            mode: Mode::Gram,
            preconditioner: Preconditioner::None,
            droptol: DEFAULT_DROPTOL,
            diagcomp: DEFAULT_DIAGCOMP,
            reorth: Reorth::default(),
            deterministic: false,
            audit_orthogonality: false,
            norm_iters: 20,
            settle_tol: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn block(&self) -> usize {
        self.block_size.unwrap_or((self.dim_k / 16).max(1)).max(1)
    }

    /// `dim_k` rounded up to a multiple of the block size.
    pub fn krylov_dim(&self) -> usize {
        let d = self.block();
        self.dim_k.max(1).div_ceil(d) * d
    }

    pub fn tolerance(&self) -> f64 {
        self.residual_tol.unwrap_or(self.epsilon)
    }

    pub fn operator_mode(&self) -> Result<OperatorMode> {
        match (self.mode, self.preconditioner) {
            (Mode::Gram, Preconditioner::None) => Ok(OperatorMode::Gram),
            (Mode::Gram, Preconditioner::Inner) => Ok(OperatorMode::GramInnerPrecond),
            (Mode::Gram, Preconditioner::Outer) => Ok(OperatorMode::GramOuterPrecond),
            (Mode::Spsd, Preconditioner::None) => Ok(OperatorMode::Spsd),
            (Mode::Spsd, Preconditioner::Outer) => Ok(OperatorMode::SpsdOuterPrecond),
            (Mode::Spsd, Preconditioner::Inner) => Err(Error::InvalidArgument(
                "inner preconditioning needs Gram mode".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.block_size == Some(0) {
            return Err(Error::InvalidArgument("block size must be at least 1".into()));
        }
        if self.krylov_dim() < 2 * self.block() {
            return Err(Error::InvalidArgument(format!(
                "dim_k = {} must hold at least two blocks of size {}",
                self.dim_k,
                self.block()
            )));
        }
        if let Some(t) = self.residual_tol {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("residual_tol must be positive, got {t}")));
            }
        }
        self.operator_mode().map(|_| ())
    }
}

/// State at the end of one restart cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord {
    pub restart_index: usize,
    pub krylov_dim: usize,
    pub matvecs_cumulative: usize,
    pub n_converged: usize,
    /// Smallest Ritz value at or above `3ε`; NaN when every Ritz value is
    /// below it.
    pub lambda_smallest_unconverged: f64,
    pub residual_av: f64,
    /// `‖[Z | Q]ᵀ[Z | Q] − I‖_max` before restarting.
    pub orthogonality_loss: f64,
    pub reorthogonalizations: usize,
    /// `‖BZ − ZT − QE‖₂`, only with `audit_orthogonality`.
    pub decomposition_residual: Option<f64>,
}

/// Header of [`write_history_csv`].
pub const HISTORY_COLUMNS: [&str; 6] = [
    "restart_index",
    "krylov_dim",
    "matvecs_cumulative",
    "n_converged",
    "lambda_smallest_unconverged",
    "residual_av",
];

/// Writes the convergence history as CSV with a header row.
pub fn write_history_csv<W: Write>(history: &[RestartRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", HISTORY_COLUMNS.join(","))?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{:e},{:e}",
            r.restart_index,
            r.krylov_dim,
            r.matvecs_cumulative,
            r.n_converged,
            r.lambda_smallest_unconverged,
            r.residual_av
        )?;
    }
    Ok(())
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct NullspaceResult {
    /// Orthonormal `n × N` basis.
    pub basis: DenseBlock,
    pub nullity: usize,
    /// `‖AV‖₂`.
    pub residual_av: f64,
    /// `‖VᵀAV‖₂` (SPSD) or `‖VᵀAᵀAV‖₂` (Gram).
    pub residual_vav: f64,
    /// Ascending eigenvalues of the final projected matrix.
    pub ritz_values: Vec<f64>,
    pub history: Vec<RestartRecord>,
    pub converged: bool,
    /// Operator applications, counted per vector.
    pub matvecs: usize,
    pub restarts: usize,
    pub block_size: usize,
    /// Krylov dimension of the last cycle; larger than configured if the
    /// nullity outgrew it.
    pub dim_k: usize,
    /// True when the problem was small enough to be solved densely.
    pub dense_fallback: bool,
    pub norm_estimate: f64,
    pub reorthogonalizations: usize,
    pub replaced_columns: usize,
    /// Measured overlaps against the monitor bound, only with
    /// `audit_orthogonality`.
    pub overlap_audit: Vec<OverlapAudit>,
}

/// `#{λ : λ < 3ε}`.
pub fn detect_converged_count(ritz_values: &[f64], epsilon: f64) -> usize {
    ritz_values.iter().take_while(|&&l| l < 3.0 * epsilon).count()
}

/// True iff the converged count is positive and equal in the last two
/// cycles, the smallest unconverged Ritz value has moved by at most
/// `settle_tol` relative between them, and `‖AV‖` passes the tolerance.
pub fn stopping_rule(history: &[RestartRecord], residual_av: f64, config: &SolverConfig) -> bool {
    match history {
        [.., a, b] => {
            a.n_converged == b.n_converged
                && b.n_converged > 0
                && settled(a, b, config.settle_tol)
                && residual_av <= config.tolerance()
        }
        _ => false,
    }
}

/// NaN (nothing left unconverged) counts as settled.
fn settled(a: &RestartRecord, b: &RestartRecord, tol: f64) -> bool {
    let (x, y) = (a.lambda_smallest_unconverged, b.lambda_smallest_unconverged);
    (x.is_nan() && y.is_nan()) || (x - y).abs() <= tol * y.abs()
}

/// Retained vector count `⌈(N + dim_k)/2⌉`, rounded up to a multiple of `d`
/// and clamped to `[N + d, dim_k − d]`. The upper end wins if the interval
/// is empty.
pub fn keep_count(n_converged: usize, dim_k: usize, d: usize) -> usize {
    let round = |x: usize| x.div_ceil(d) * d;
    let hi = dim_k - d;
    let lo = round(n_converged + d);
    round((n_converged + dim_k).div_ceil(2)).max(lo).min(hi)
}

/// `(‖AV‖₂, ‖VᵀAV‖₂)` for SPSD operators, `(‖AV‖₂, ‖VᵀAᵀAV‖₂)` for Gram.
pub fn residual_norms(a: &SparseMatrix, v: &DenseBlock, mode: OperatorMode) -> Result<(f64, f64)> {
    if v.ncols() == 0 {
        return Ok((0.0, 0.0));
    }
    let av = a.spmv_block(v)?;
    let gram = av.tr_matmul(&av);
    let top = sym_eig(&gram)?.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let norm_av = top.sqrt();
    if mode.is_gram() {
        Ok((norm_av, top))
    } else {
        Ok((norm_av, spectral_norm(&v.tr_matmul(&av))))
    }
}

/// Computes an orthonormal basis of the approximate null space of `a`.
pub fn solve(a: &SparseMatrix, config: &SolverConfig) -> Result<NullspaceResult> {
    if config.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| solve_inner(a, config))
    } else {
        solve_inner(a, config)
    }
}

/// Builds the operator the solver would use for `a` under `config`.
pub fn build_operator(a: &SparseMatrix, config: &SolverConfig) -> Result<PerturbedOperator> {
    config.validate()?;
    let mode = config.operator_mode()?;
    let matrix = Arc::new(a.clone());
    if mode.needs_preconditioner() {
        let factor = Arc::new(factor_for_mode(a, mode, config.droptol, config.diagcomp)?);
        let diag_d = crate::rng::uniform_vec(&mut stream(config.seed, Stream::Diagonal), a.ncols());
        PerturbedOperator::with_diagonal(matrix, mode, config.epsilon, diag_d, Some(factor))
    } else {
        PerturbedOperator::new(matrix, mode, config.epsilon, config.seed)
    }
}

fn solve_inner(a: &SparseMatrix, config: &SolverConfig) -> Result<NullspaceResult> {
    let op = build_operator(a, config)?;
    let n = op.dim();
    let d = config.block();
    let mut dim_k = config.krylov_dim();
    let norm_b = op.norm_estimate(config.norm_iters, config.seed)?;
    if dim_k + d > n {
        return solve_dense(&op, config, norm_b);
    }
    let cap = (n - d) / d * d;

    let omega = gaussian_block(&mut stream(config.seed, Stream::StartBlock), n, d);
    let mut state = LanczosState::init(&op, &omega, norm_b, config.reorth, config.seed)?;
    if config.audit_orthogonality {
        state.enable_audit();
    }
    let eps = config.epsilon;
    let mut history: Vec<RestartRecord> = Vec::new();
    let mut converged = false;
    let mut restarts = 0;
    let (mut v, mut ritz, mut residual_av);

    loop {
        while state.krylov_dim() < dim_k {
            state.step(&op)?;
        }
        let decomposition_residual = if config.audit_orthogonality {
            Some(state.decomposition_residual(&op)?)
        } else {
            None
        };
        let eig = state.ritz()?;
        let nc = detect_converged_count(&eig.eigenvalues, eps);
        v = extract(&op, &state, &eig.eigenvectors.cols_owned(0..nc))?;
        residual_av = residual_norms(a, &v, op.mode())?.0;
        history.push(RestartRecord {
            restart_index: restarts,
            krylov_dim: state.krylov_dim(),
            matvecs_cumulative: config.norm_iters + state.matvecs(),
            n_converged: nc,
            lambda_smallest_unconverged: eig.eigenvalues.get(nc).copied().unwrap_or(f64::NAN),
            residual_av,
            orthogonality_loss: state.orthogonality_loss(),
            reorthogonalizations: state.reorth_events(),
            decomposition_residual,
        });
        ritz = eig.eigenvalues;

        if stopping_rule(&history, residual_av, config) || trivially_empty(&history, config) {
            converged = true;
            break;
        }
        if restarts >= config.max_restarts {
            break;
        }
        if nc + 2 * d > dim_k && dim_k < cap {
            dim_k = (2 * dim_k).max(nc + 4 * d).div_ceil(d).min(cap / d) * d;
        } else {
            state.restart(keep_count(nc, dim_k, d))?;
        }
        restarts += 1;
    }

    let nullity = v.ncols();
    let residual_vav = residual_norms(a, &v, op.mode())?.1;
    Ok(NullspaceResult {
        basis: v,
        nullity,
        residual_av,
        residual_vav,
        ritz_values: ritz,
        history,
        converged,
        matvecs: config.norm_iters + state.matvecs(),
        restarts,
        block_size: d,
        dim_k,
        dense_fallback: false,
        norm_estimate: norm_b,
        reorthogonalizations: state.reorth_events(),
        replaced_columns: state.replaced_columns(),
        overlap_audit: state.audit().to_vec(),
    })
}

/// Two settled cycles without any Ritz value within a factor 10 of `3ε`.
fn trivially_empty(history: &[RestartRecord], config: &SolverConfig) -> bool {
    let [.., a, b] = history else {
        return false;
    };
    let far = |r: &RestartRecord| r.n_converged == 0 && r.lambda_smallest_unconverged >= 30.0 * config.epsilon;
    far(a) && far(b) && settled(a, b, config.settle_tol)
}

/// Lifts Ritz vectors, maps them back through an outer factor and
/// re-orthonormalizes.
fn extract(op: &PerturbedOperator, state: &LanczosState, y: &DenseBlock) -> Result<DenseBlock> {
    if y.ncols() == 0 {
        return Ok(DenseBlock::zeros(op.dim(), 0));
    }
    let v = op.outer_backtransform(&state.lift(y))?;
    Ok(block_qr(&v, None, &mut stream(0, Stream::Breakdown))?.q)
}

fn solve_dense(op: &PerturbedOperator, config: &SolverConfig, norm_b: f64) -> Result<NullspaceResult> {
    let n = op.dim();
    let eig = sym_eig(&op.to_dense()?)?;
    let nc = detect_converged_count(&eig.eigenvalues, config.epsilon);
    let v = if nc == 0 {
        DenseBlock::zeros(n, 0)
    } else {
        let v = op.outer_backtransform(&eig.eigenvectors.cols_owned(0..nc))?;
        block_qr(&v, None, &mut stream(0, Stream::Breakdown))?.q
    };
    let (residual_av, residual_vav) = residual_norms(op.matrix(), &v, op.mode())?;
    let matvecs = config.norm_iters + n;
    let record = RestartRecord {
        restart_index: 0,
        krylov_dim: n,
        matvecs_cumulative: matvecs,
        n_converged: nc,
        lambda_smallest_unconverged: eig.eigenvalues.get(nc).copied().unwrap_or(f64::NAN),
        residual_av,
        orthogonality_loss: eig.eigenvectors.orthonormality_error(),
        reorthogonalizations: 0,
        decomposition_residual: None,
    };
    Ok(NullspaceResult {
        nullity: v.ncols(),
        basis: v,
        residual_av,
        residual_vav,
        ritz_values: eig.eigenvalues,
        history: vec![record],
        converged: true,
        matvecs,
        restarts: 0,
        block_size: config.block(),
        dim_k: n,
        dense_fallback: true,
        norm_estimate: norm_b,
        reorthogonalizations: 0,
        replaced_columns: 0,
        overlap_audit: Vec::new(),
    })
}
