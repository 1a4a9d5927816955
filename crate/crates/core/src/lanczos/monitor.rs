use crate::UNIT_ROUNDOFF;

/// Which form of the retained-block branch of the recurrence to use.
///
/// For a retained block `k`, the bound on `‖Q_kᵀQ_{ℓ+1}‖` can be written
/// either with the entries `w_{ℓ₀+1,ℓ}` and `w_{ℓ₀,ℓ}` (the form usually
/// quoted) or with `w_{k,ℓ}` and `w_{ℓ₀+1,ℓ}`, which is what a direct
/// expansion of `Q_kᵀ B Q_ℓ` through the retained relation gives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WFormula {
    #[default]
    Printed,
    Expanded,
}

/// Everything one column of the W recurrence depends on.
///
/// Blocks are numbered from 0: retained blocks are `0..p`, the first block
/// after the restart is `p`, the current block `Q_ℓ` is `c` and the column
/// being computed belongs to `Q_{ℓ+1}`, block `c + 1`.
#[derive(Debug, Clone)]
pub struct WInputs<'a> {
    pub p: usize,
    pub c: usize,
    /// Column of block `c − 1`, entries for rows `0..c−1`.
    pub prev: &'a [f64],
    /// Column of block `c`, entries for rows `0..c`.
    pub curr: &'a [f64],
    /// `‖Θ_k‖` and `‖F_k‖` for retained blocks.
    pub theta_norms: &'a [f64],
    pub f_norms: &'a [f64],
    /// `‖α_k‖`, `‖Γ_k‖` indexed by block number minus `p`.
    pub alpha_norms: &'a [f64],
    pub gamma_norms: &'a [f64],
    /// `‖Γ_ℓ⁻¹‖`.
    pub gamma_inv_norm: f64,
    pub eps_d: f64,
    pub formula: WFormula,
}

/// Column `c + 1` of W, rows `0..=c`.
///
/// Entries on the diagonal stand for a block against itself after local
/// orthogonalization and are taken as `eps_d`; entries below the diagonal
/// are not part of W and read as zero.
pub fn w_column(inp: &WInputs<'_>) -> Vec<f64> {
    let WInputs { p, c, eps_d, .. } = *inp;
    assert!(c > p, "W columns past the first two are only defined for c > p");
    let curr = |k: usize| -> f64 {
        match k.cmp(&c) {
            std::cmp::Ordering::Less => inp.curr[k],
            std::cmp::Ordering::Equal => eps_d,
            std::cmp::Ordering::Greater => 0.0,
        }
    };
    let prev = |k: usize| -> f64 {
        match k.cmp(&(c - 1)) {
            std::cmp::Ordering::Less => inp.prev[k],
            std::cmp::Ordering::Equal => eps_d,
            std::cmp::Ordering::Greater => 0.0,
        }
    };
    let an = |k: usize| inp.alpha_norms[k - p];
    let gn = |k: usize| inp.gamma_norms[k - p];
    let g = inp.gamma_inv_norm;
    let a_l = an(c);
    let g_lm1 = gn(c - 1);

    (0..=c)
        .map(|k| {
            let inner = if k < p {
                match inp.formula {
                    WFormula::Printed => {
                        let w_last = if p >= 1 { curr(p - 1) } else { 0.0 };
                        curr(p) * (inp.theta_norms[k] + a_l) + w_last * inp.f_norms[k]
                    }
                    WFormula::Expanded => {
                        curr(k) * (inp.theta_norms[k] + a_l) + curr(p) * inp.f_norms[k]
                    }
                }
            } else if k == p {
                let coupling: f64 = (0..p).map(|i| curr(i) * inp.f_norms[i]).sum();
                curr(k) * (an(k) + a_l) + coupling + curr(k + 1) * gn(k)
            } else {
                curr(k) * (an(k) + a_l) + curr(k + 1) * gn(k) + curr(k - 1) * gn(k - 1)
            };
            g * (inner + prev(k) * g_lm1 + 2.0 * eps_d)
        })
        .collect()
}

/// Running bound on the loss of orthogonality between Lanczos blocks.
#[derive(Debug, Clone)]
pub struct OrthoMonitor {
    eps_d: f64,
    eps_ro: f64,
    formula: WFormula,
    p: usize,
    theta_norms: Vec<f64>,
    f_norms: Vec<f64>,
    alpha_norms: Vec<f64>,
    gamma_norms: Vec<f64>,
    prev: Vec<f64>,
    curr: Vec<f64>,
}

impl OrthoMonitor {
    /// `eps_d = d·√n·u·‖B‖`, `eps_ro = √u`.
    pub fn new(n: usize, d: usize, norm_b: f64, formula: WFormula) -> Self {
        let eps_d = d as f64 * (n as f64).sqrt() * UNIT_ROUNDOFF * norm_b;
        let mut m = OrthoMonitor {
            eps_d,
            eps_ro: UNIT_ROUNDOFF.sqrt(),
            formula,
            p: 0,
            theta_norms: Vec::new(),
            f_norms: Vec::new(),
            alpha_norms: Vec::new(),
            gamma_norms: Vec::new(),
            prev: Vec::new(),
            curr: Vec::new(),
        };
        m.reset(Vec::new(), Vec::new());
        m
    }

    pub fn eps_d(&self) -> f64 {
        self.eps_d
    }

    pub fn eps_ro(&self) -> f64 {
        self.eps_ro
    }

    pub fn formula(&self) -> WFormula {
        self.formula
    }

    pub fn retained_blocks(&self) -> usize {
        self.p
    }

    /// Starts a new cycle with `theta_norms.len()` retained blocks. The
    /// first two columns of the cycle are set to `eps_d`.
    pub fn reset(&mut self, theta_norms: Vec<f64>, f_norms: Vec<f64>) {
        assert_eq!(theta_norms.len(), f_norms.len());
        self.p = theta_norms.len();
        self.theta_norms = theta_norms;
        self.f_norms = f_norms;
        self.alpha_norms.clear();
        self.gamma_norms.clear();
        self.prev = vec![self.eps_d; self.p];
        self.curr = vec![self.eps_d; self.p + 1];
    }

    /// Records `‖α‖` and `‖Γ‖` of the block just completed.
    pub fn push_block(&mut self, alpha_norm: f64, gamma_norm: f64) {
        self.alpha_norms.push(alpha_norm);
        self.gamma_norms.push(gamma_norm);
    }

    /// The two most recent columns.
    pub fn columns(&self) -> (&[f64], &[f64]) {
        (&self.prev, &self.curr)
    }

    /// Computes the next column from the recorded norms and shifts it in.
    /// Returns the new column and whether it crosses `eps_ro`.
    pub fn advance(&mut self, gamma_inv_norm: f64, force: bool) -> (Vec<f64>, bool) {
        let c = self.p + self.alpha_norms.len() - 1;
        let col = w_column(&WInputs {
            p: self.p,
            c,
            prev: &self.prev,
            curr: &self.curr,
            theta_norms: &self.theta_norms,
            f_norms: &self.f_norms,
            alpha_norms: &self.alpha_norms,
            gamma_norms: &self.gamma_norms,
            gamma_inv_norm,
            eps_d: self.eps_d,
            formula: self.formula,
        });
        let trigger = force || col.iter().any(|&w| w > self.eps_ro);
        self.prev = std::mem::replace(&mut self.curr, col.clone());
        (col, trigger)
    }

    /// After reorthogonalizing `Q_ℓ` and `Q_{ℓ+1}`, both of their columns
    /// drop back to `eps_d`.
    pub fn mark_reorthogonalized(&mut self) {
        self.prev.iter_mut().for_each(|w| *w = self.eps_d);
        self.curr.iter_mut().for_each(|w| *w = self.eps_d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight transcription with 1-based indices and a full matrix,
    /// used as an oracle for the compact implementation.
    #[allow(clippy::too_many_arguments)]
    fn oracle_column(
        l0: usize,
        l: usize,
        w: &[Vec<f64>],
        theta: &[f64],
        f: &[f64],
        alpha: &[f64],
        gamma: &[f64],
        ginv: f64,
        eps: f64,
    ) -> Vec<f64> {
        // w[i][j] for 1 <= i < j <= l, 1-based with padding; alpha/gamma
        // 1-based by block number.
        let wv = |i: usize, j: usize| -> f64 {
            if i < j {
                w[i][j]
            } else if i == j {
                eps
            } else {
                0.0
            }
        };
        let mut out = Vec::new();
        for k in 1..=l {
            let v = if k <= l0 {
                ginv * (wv(l0 + 1, l) * (theta[k] + alpha[l])
                    + if l0 >= 1 { wv(l0, l) * f[k] } else { 0.0 }
                    + wv(k, l - 1) * gamma[l - 1]
                    + 2.0 * eps)
            } else if k == l0 + 1 {
                let s: f64 = (1..=l0).map(|i| wv(i, l) * f[i]).sum();
                ginv * (wv(k, l) * (alpha[k] + alpha[l])
                    + s
                    + wv(k + 1, l) * gamma[k]
                    + wv(k, l - 1) * gamma[l - 1]
                    + 2.0 * eps)
            } else {
                ginv * (wv(k, l) * (alpha[k] + alpha[l])
                    + wv(k + 1, l) * gamma[k]
                    + wv(k - 1, l) * gamma[k - 1]
                    + wv(k, l - 1) * gamma[l - 1]
                    + 2.0 * eps)
            };
            out.push(v);
        }
        out
    }

    #[test]
    fn first_two_columns_are_eps_d() {
        let mut m = OrthoMonitor::new(100, 2, 3.0, WFormula::Printed);
        m.reset(vec![1.0, 2.0], vec![0.1, 0.2]);
        let (prev, curr) = m.columns();
        assert!(prev.iter().chain(curr).all(|&w| w == m.eps_d()));
        assert_eq!(curr.len(), 3);
    }

    #[test]
    fn zero_norms_give_twice_eps_times_inverse() {
        let mut m = OrthoMonitor::new(50, 1, 1.0, WFormula::Printed);
        m.reset(vec![0.0; 2], vec![0.0; 2]);
        m.push_block(0.0, 0.0);
        m.push_block(0.0, 0.0);
        let ginv = 7.0;
        let (col, trigger) = m.advance(ginv, false);
        assert!(col.iter().all(|&w| (w - ginv * 2.0 * m.eps_d()).abs() < 1e-30));
        assert!(!trigger);
    }

    #[test]
    fn matches_full_matrix_transcription() {
        use crate::rng::{stream, uniform_vec, Stream};
        let mut rng = stream(3, Stream::Trial(9));
        for &(l0, steps) in &[(0usize, 6usize), (3, 5), (1, 4)] {
            let eps = 1e-12;
            let theta = uniform_vec(&mut rng, l0);
            let f = uniform_vec(&mut rng, l0);
            let mut m = OrthoMonitor::new(10, 1, 1.0, WFormula::Printed);
            // Override eps_d so the oracle and the monitor agree on it.
            m.eps_d = eps;
            m.reset(theta.clone(), f.clone());
            let total = l0 + 1 + steps + 1;
            let mut w = vec![vec![0.0; total + 2]; total + 2];
            for i in 1..=l0 {
                w[i][l0 + 1] = eps;
            }
            for i in 1..=l0 + 1 {
                w[i][l0 + 2] = eps;
            }
            let mut alpha = vec![0.0; total + 2];
            let mut gamma = vec![0.0; total + 2];
            let mut theta1 = vec![0.0];
            theta1.extend(&theta);
            let mut f1 = vec![0.0];
            f1.extend(&f);
            for s in 0..steps + 1 {
                let block = l0 + 1 + s;
                let a = 1.0 + uniform_vec(&mut rng, 1)[0];
                let g = 0.5 + uniform_vec(&mut rng, 1)[0];
                alpha[block] = a;
                gamma[block] = g;
                m.push_block(a, g);
                if s == 0 {
                    continue;
                }
                let ginv = 1.0 / g;
                let (col, _) = m.advance(ginv, false);
                let expect = oracle_column(l0, block, &w, &theta1, &f1, &alpha, &gamma, ginv, eps);
                assert_eq!(col.len(), expect.len());
                for (k, (x, y)) in col.iter().zip(&expect).enumerate() {
                    assert!((x - y).abs() <= 1e-14 * y.abs(), "l0={l0} l={block} k={k}: {x} vs {y}");
                    w[k + 1][block + 1] = *y;
                }
            }
        }
    }

    #[test]
    fn reorthogonalization_resets_columns() {
        let mut m = OrthoMonitor::new(10, 1, 1.0, WFormula::Printed);
        m.push_block(1.0, 1.0);
        m.push_block(1.0, 1e-20);
        let (_, trigger) = m.advance(1e20, false);
        assert!(trigger);
        m.mark_reorthogonalized();
        let (prev, curr) = m.columns();
        assert!(prev.iter().chain(curr).all(|&w| w == m.eps_d()));
    }
}
