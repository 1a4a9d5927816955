use rand_chacha::ChaCha8Rng;

use super::monitor::{OrthoMonitor, WFormula};
use crate::dense::{block_qr, spectral_norm, sym_eig, thin_svd, DenseBlock, EigResult};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::sparse::PerturbedOperator;
use crate::UNIT_ROUNDOFF;

/// Partial reorthogonalization policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reorth {
    /// Reorthogonalize when the W bound crosses `√u`.
    Partial(WFormula),
    /// Orthogonalize every new block against the whole basis.
    Full,
    /// Local orthogonalization only. For experiments.
    None,
}

impl Default for Reorth {
    fn default() -> Self {
        Reorth::Partial(WFormula::Printed)
    }
}

/// One comparison of the monitor bound with the measured overlap.
#[derive(Debug, Clone, Copy)]
pub struct OverlapAudit {
    pub measured: f64,
    pub bound: f64,
}

/// Restarted block Lanczos decomposition
/// `B Z = Z T + Q_next E`, with `Z = [Z_retained | Q_{ℓ₀+1} | … | Q_ℓ]`.
///
/// The basis holds `Z` followed by the pending block `Q_{ℓ+1}`. `T` is
/// block tridiagonal with a diagonal leading block of retained Ritz values
/// coupled to the first new block through `F`.
#[derive(Debug, Clone)]
pub struct LanczosState {
    n: usize,
    d: usize,
    retained: usize,
    basis: DenseBlock,
    theta: Vec<f64>,
    f_coupling: DenseBlock,
    alphas: Vec<DenseBlock>,
    betas: Vec<DenseBlock>,
    monitor: OrthoMonitor,
    reorth: Reorth,
    rng: ChaCha8Rng,
    norm_b: f64,
    matvecs: usize,
    reorth_events: usize,
    replaced: usize,
    audit: Option<Vec<OverlapAudit>>,
}

impl LanczosState {
    /// `Q₁ = orth(Ω)`.
    pub fn init(b: &PerturbedOperator, omega: &DenseBlock, norm_b: f64, reorth: Reorth, seed: u64) -> Result<Self> {
        let n = b.dim();
        let d = omega.ncols();
        if omega.nrows() != n || d == 0 || d > n {
            return Err(Error::DimensionMismatch(format!(
                "start block of shape {:?} for operator of dimension {n}",
                omega.shape()
            )));
        }
        let mut rng = stream(seed, Stream::Breakdown);
        let qr = block_qr(omega, None, &mut rng)?;
        let formula = match reorth {
            Reorth::Partial(f) => f,
            _ => WFormula::Printed,
        };
        Ok(LanczosState {
            n,
            d,
            retained: 0,
            basis: qr.q,
            theta: Vec::new(),
            f_coupling: DenseBlock::zeros(0, d),
            alphas: Vec::new(),
            betas: Vec::new(),
            monitor: OrthoMonitor::new(n, d, norm_b, formula),
            reorth,
            rng,
            norm_b,
            matvecs: 0,
            reorth_events: 0,
            replaced: qr.replaced_columns.len(),
            audit: None,
        })
    }

    pub fn block_size(&self) -> usize {
        self.d
    }

    pub fn retained(&self) -> usize {
        self.retained
    }

    /// Dimension of `T`, i.e. number of columns of `Z`.
    pub fn krylov_dim(&self) -> usize {
        self.retained + self.alphas.len() * self.d
    }

    pub fn steps_since_restart(&self) -> usize {
        self.alphas.len()
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    pub fn reorth_events(&self) -> usize {
        self.reorth_events
    }

    pub fn replaced_columns(&self) -> usize {
        self.replaced
    }

    pub fn monitor(&self) -> &OrthoMonitor {
        &self.monitor
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn f_coupling(&self) -> &DenseBlock {
        &self.f_coupling
    }

    pub fn alphas(&self) -> &[DenseBlock] {
        &self.alphas
    }

    pub fn betas(&self) -> &[DenseBlock] {
        &self.betas
    }

    /// `Z`, without the pending block.
    pub fn z(&self) -> DenseBlock {
        self.basis.cols_owned(0..self.krylov_dim())
    }

    /// The pending block `Q_{ℓ+1}`.
    pub fn next_block(&self) -> DenseBlock {
        let k = self.krylov_dim();
        self.basis.cols_owned(k..k + self.d)
    }

    /// `[Z | Q_{ℓ+1}]`.
    pub fn basis(&self) -> &DenseBlock {
        &self.basis
    }

    /// Starts recording measured-vs-bound overlaps at every monitor update.
    /// Costs a full projection per step; for tests.
    pub fn enable_audit(&mut self) {
        self.audit = Some(Vec::new());
    }

    pub fn audit(&self) -> &[OverlapAudit] {
        self.audit.as_deref().unwrap_or(&[])
    }

    fn block_start(&self, a: usize) -> usize {
        self.retained + a * self.d
    }

    /// Advances the recurrence by one block.
    ///
    /// The first step after (re)starting projects `B Q_{ℓ₀+1}` against the
    /// whole basis. Later steps use the three-term recurrence with local
    /// orthogonalization, then consult the monitor.
    pub fn step(&mut self, b: &PerturbedOperator) -> Result<()> {
        let d = self.d;
        let a = self.alphas.len();
        let start = self.block_start(a);
        if start + 2 * d > self.n {
            return Err(Error::InvalidArgument(format!(
                "Krylov dimension {} plus two blocks exceeds n = {}",
                start, self.n
            )));
        }
        let q = self.basis.cols_owned(start..start + d);
        let mut w = b.apply(&q)?;
        self.matvecs += d;

        let full = a == 0 || self.reorth == Reorth::Full;
        if a > 0 {
            let prev = self.basis.cols(start - d..start);
            prev.sub_matmul_from(&self.betas[a - 1].transpose(), &mut w);
        }
        let mut alpha = q.tr_matmul(&w);
        alpha.symmetrize();
        if a > 0 {
            q.view().sub_matmul_from(&alpha, &mut w);
        }

        let local_lo = if a == 0 { 0 } else { start - d };
        let against_lo = if full { 0 } else { local_lo };
        let mut qr = block_qr(&w, Some(self.basis.cols(against_lo..start + d)), &mut self.rng)?;
        if !qr.replaced_columns.is_empty() && !full {
            // A fresh random direction overlaps every earlier block, so a
            // breakdown always gets a full pass.
            qr = block_qr(&w, Some(self.basis.cols(0..start + d)), &mut self.rng)?;
        }
        self.replaced += qr.replaced_columns.len();
        let broke_down = !qr.replaced_columns.is_empty();

        let alpha_norm = spectral_norm(&alpha);
        let gamma_norm = spectral_norm(&qr.r);
        self.alphas.push(alpha);
        self.betas.push(qr.r);
        self.basis.push_cols(qr.q.view());
        self.monitor.push_block(alpha_norm, gamma_norm);

        if a == 0 || !matches!(self.reorth, Reorth::Partial(_)) {
            return Ok(());
        }
        let (ginv, singular) = self.gamma_inverse_norm();
        let (column, trigger) = self.monitor.advance(ginv, singular || broke_down);
        if self.audit.is_some() {
            self.record_audit(&column);
        }
        if trigger {
            self.reorthogonalize()?;
        }
        Ok(())
    }

    /// `‖Γ_ℓ⁻¹‖` and whether `Γ_ℓ` is numerically singular. Singular values
    /// at or below `eps_d` are dropped from the inverse; the rest are
    /// floored at `u·‖B‖`.
    fn gamma_inverse_norm(&self) -> (f64, bool) {
        let gamma = self.betas.last().expect("called after a step");
        let s = thin_svd(gamma).map(|s| s.singular_values).unwrap_or_default();
        let eps_d = self.monitor.eps_d();
        let floor = (UNIT_ROUNDOFF * self.norm_b).max(f64::MIN_POSITIVE);
        let smin = s.last().copied().unwrap_or(0.0);
        if smin > eps_d {
            return (1.0 / smin.max(floor), false);
        }
        let smallest_kept = s.iter().rev().find(|&&v| v > eps_d).copied();
        let ginv = smallest_kept.map_or(0.0, |v| 1.0 / v.max(floor));
        (ginv, true)
    }

    fn record_audit(&mut self, column: &[f64]) {
        let d = self.d;
        let k_next = self.krylov_dim();
        let next = self.basis.cols(k_next..k_next + d);
        let p = self.monitor.retained_blocks();
        let mut entries = Vec::new();
        for (k, &bound) in column.iter().enumerate() {
            let (lo, hi) = if k < p {
                (k * d, ((k + 1) * d).min(self.retained))
            } else {
                let a = k - p;
                (self.block_start(a), self.block_start(a) + d)
            };
            let overlap = self.basis.cols(lo..hi).tr_matmul(next);
            entries.push(OverlapAudit {
                measured: spectral_norm(&overlap),
                bound,
            });
        }
        if let Some(log) = self.audit.as_mut() {
            log.extend(entries);
        }
    }

    /// Reorthogonalizes `Q_ℓ` against `Z_{ℓ−1}` and `Q_{ℓ+1}` against
    /// `Z_ℓ`, absorbing the triangular factor of the second pass into
    /// `Γ_ℓ`.
    pub fn reorthogonalize(&mut self) -> Result<()> {
        let d = self.d;
        let a = self.alphas.len();
        if a < 2 {
            return Ok(());
        }
        let cur = self.block_start(a - 1);
        let next = self.block_start(a);

        let q_l = self.basis.cols_owned(cur..cur + d);
        let fixed = block_qr(&q_l, Some(self.basis.cols(0..cur)), &mut self.rng)?;
        self.basis.set_cols(cur, &fixed.q);

        let q_next = self.basis.cols_owned(next..next + d);
        let fixed = block_qr(&q_next, Some(self.basis.cols(0..next)), &mut self.rng)?;
        self.basis.set_cols(next, &fixed.q);
        let gamma = self.betas.last_mut().expect("a >= 2");
        *gamma = fixed.r.matmul(gamma);
        self.replaced += fixed.replaced_columns.len();

        self.monitor.mark_reorthogonalized();
        self.reorth_events += 1;
        Ok(())
    }

    /// Adds `size` times the first basis vector to the current and pending
    /// blocks, simulating accumulated round-off. For testing
    /// reorthogonalization.
    pub fn perturb_active_blocks(&mut self, size: f64) {
        let a = self.alphas.len();
        if a == 0 {
            return;
        }
        let first = self.basis.col(0).to_vec();
        let lo = self.block_start(a - 1).max(1);
        for j in lo..self.block_start(a) + self.d {
            crate::dense::axpy_slice(self.basis.col_mut(j), size, &first);
        }
    }

    /// Dense `T`.
    pub fn assemble_t(&self) -> DenseBlock {
        let d = self.d;
        let r = self.retained;
        let dim = self.krylov_dim();
        let mut t = DenseBlock::zeros(dim, dim);
        for (i, &th) in self.theta.iter().enumerate() {
            t[(i, i)] = th;
        }
        if !self.alphas.is_empty() && r > 0 {
            t.set_submatrix(0, r, &self.f_coupling);
            t.set_submatrix(r, 0, &self.f_coupling.transpose());
        }
        for (a, alpha) in self.alphas.iter().enumerate() {
            let s = r + a * d;
            t.set_submatrix(s, s, alpha);
            if a + 1 < self.alphas.len() {
                let g = &self.betas[a];
                t.set_submatrix(s + d, s, g);
                t.set_submatrix(s, s + d, &g.transpose());
            }
        }
        t.symmetrize();
        t
    }

    /// `‖B Z − Z T − Q_{ℓ+1} E‖₂`, evaluated densely.
    pub fn decomposition_residual(&self, b: &PerturbedOperator) -> Result<f64> {
        let z = self.z();
        let t = self.assemble_t();
        let mut res = b.apply(&z)?;
        z.view().sub_matmul_from(&t, &mut res);
        if let Some(g) = self.betas.last() {
            let dim = self.krylov_dim();
            let mut e = DenseBlock::zeros(self.d, dim);
            e.set_submatrix(0, dim - self.d, g);
            self.basis
                .cols(dim..dim + self.d)
                .sub_matmul_from(&e, &mut res);
        } else if self.retained > 0 {
            // Straight after a restart: B Z = Z Θ + Q Fᵀ.
            self.basis
                .cols(self.retained..self.retained + self.d)
                .sub_matmul_from(&self.f_coupling.transpose(), &mut res);
        }
        Ok(spectral_norm(&res))
    }

    /// `‖[Z | Q_{ℓ+1}]ᵀ[Z | Q_{ℓ+1}] − I‖_max`.
    pub fn orthogonality_loss(&self) -> f64 {
        self.basis.orthonormality_error()
    }

    /// Eigendecomposition of `T`.
    pub fn ritz(&self) -> Result<EigResult> {
        sym_eig(&self.assemble_t())
    }

    /// `Z · y` for coefficient vectors `y`.
    pub fn lift(&self, y: &DenseBlock) -> DenseBlock {
        self.basis.cols(0..self.krylov_dim()).matmul(y)
    }

    /// Compresses to the `keep` smallest Ritz pairs.
    ///
    /// `Z ← Z V(:, :keep)`, the pending block is orthogonalized against the
    /// new `Z` (`Q = Q̃ R`), and `F = (R Γ_ℓ V(last block, :keep))ᵀ`.
    /// Returns the eigendecomposition of the old `T`.
    pub fn restart(&mut self, keep: usize) -> Result<EigResult> {
        let dim = self.krylov_dim();
        if keep == 0 || keep > dim {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {keep} Ritz pairs of a {dim}-dimensional basis"
            )));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidArgument("restart needs at least one step".into()));
        }
        let d = self.d;
        let eig = self.ritz()?;
        let vz = eig.eigenvectors.cols_owned(0..keep);
        let z_new = self.basis.cols(0..dim).matmul(&vz);
        let pending = self.basis.cols_owned(dim..dim + d);
        let qr = block_qr(&pending, Some(z_new.view()), &mut self.rng)?;
        self.replaced += qr.replaced_columns.len();

        let v_last = vz.submatrix(dim - d..dim, 0..keep);
        let gamma = self.betas.last().expect("at least one step");
        let ev = qr.r.matmul(gamma).matmul(&v_last);
        self.f_coupling = ev.transpose();
        self.theta = eig.eigenvalues[..keep].to_vec();
        self.retained = keep;
        let mut basis = z_new;
        basis.push_cols(qr.q.view());
        self.basis = basis;
        self.alphas.clear();
        self.betas.clear();

        let blocks = keep.div_ceil(d);
        let mut theta_norms = Vec::with_capacity(blocks);
        let mut f_norms = Vec::with_capacity(blocks);
        for k in 0..blocks {
            let (lo, hi) = (k * d, ((k + 1) * d).min(keep));
            theta_norms.push(self.theta[lo..hi].iter().fold(0.0f64, |m, v| m.max(v.abs())));
            f_norms.push(spectral_norm(&self.f_coupling.submatrix(lo..hi, 0..d)));
        }
        self.monitor.reset(theta_norms, f_norms);
        Ok(eig)
    }
}
