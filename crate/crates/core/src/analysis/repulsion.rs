use rayon::prelude::*;

use super::check_dense_dim;
use crate::dense::sym_eig;
use crate::error::{Error, Result};
use crate::rng::{stream, uniform_vec, Stream};
use crate::sparse::SparseMatrix;
use crate::UNIT_ROUNDOFF;

/// Probability levels reported by default.
pub const DEFAULT_LEVELS: [f64; 2] = [0.1, 0.5];

/// Grid points used by [`cdf_shape_check`].
const CDF_GRID: usize = 50;

/// Minimum gaps among the perturbed zero eigenvalues of `AᵀA + εD` over
/// independent draws of `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepulsionReport {
    pub trials: usize,
    pub epsilon: f64,
    pub n: usize,
    pub nullity: usize,
    /// One per trial, in trial order.
    pub min_gaps: Vec<f64>,
    /// `(δ, empirical δ-quantile of the minimum gap)`, ascending in `δ`.
    pub quantiles: Vec<(f64, f64)>,
}

/// Runs `trials` draws of `D`, each from its own stream of `seed`.
///
/// `N` is the number of eigenvalues of `AᵀA` at or below
/// `100·n·u·‖AᵀA‖`. Needs `N ≥ 2` and `ε` below the smallest nonzero one.
pub fn repulsion_experiment(a: &SparseMatrix, epsilon: f64, trials: usize, seed: u64) -> Result<RepulsionReport> {
    let n = a.ncols();
    check_dense_dim(n)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) || trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "need epsilon > 0 and trials > 0, got {epsilon} and {trials}"
        )));
    }
    let dense = a.to_dense();
    let gram = dense.tr_matmul(&dense);
    let eigs = sym_eig(&gram)?.eigenvalues;
    let top = eigs.last().copied().unwrap_or(0.0).max(0.0);
    let tol = 100.0 * n as f64 * UNIT_ROUNDOFF * top;
    let nullity = eigs.iter().take_while(|&&l| l <= tol).count();
    if nullity < 2 {
        return Err(Error::InvalidArgument(format!(
            "minimum gap needs a null space of dimension >= 2, found {nullity}"
        )));
    }
    if nullity < n && epsilon >= eigs[nullity] {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon:e} is not below the smallest nonzero eigenvalue {:e}",
            eigs[nullity]
        )));
    }
    let min_gaps = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let d = uniform_vec(&mut stream(seed, Stream::Trial(t)), n);
            let mut b = gram.clone();
            for (i, di) in d.iter().enumerate() {
                b[(i, i)] += epsilon * di;
            }
            let e = sym_eig(&b)?.eigenvalues;
            Ok(e[..nullity].windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(f64::INFINITY, f64::min))
        })
        .collect::<Result<Vec<f64>>>()?;
    let quantiles = DEFAULT_LEVELS
        .iter()
        .map(|&d| (d, empirical_quantile(&min_gaps, d)))
        .collect();
    Ok(RepulsionReport {
        trials,
        epsilon,
        n,
        nullity,
        min_gaps,
        quantiles,
    })
}

/// Inverse of the empirical CDF: the smallest sample `x` with
/// `#{≤ x}/len ≥ p`.
pub fn empirical_quantile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let k = (p * s.len() as f64).ceil() as usize;
    s[k.clamp(1, s.len()) - 1]
}

/// Affine fit of the minimum-gap CDF near zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfShape {
    /// Right end of the fitted window, `min(ε/10, median gap)`.
    pub window: f64,
    pub intercept: f64,
    /// Per unit of `γ/ε`, clamped to be nonnegative.
    pub slope: f64,
    /// Dvoretzky-Kiefer-Wolfowitz half-width at 95 %, `1.36/√T`.
    pub band: f64,
    /// Largest `F(γ) − fit(γ)` over the grid.
    pub max_excess: f64,
    /// The fit plus the band dominates the CDF on the window and the
    /// intercept lies inside the band, so there is no atom at zero.
    pub consistent: bool,
}

/// Checks that the empirical CDF of `min_gaps` rises at most linearly in
/// `γ/ε` from zero.
///
/// The window stops at the median gap: the claim is about the small-gap
/// tail, and above the median the CDF of a minimum spacing saturates,
/// which would only distort the line.
pub fn cdf_shape_check(min_gaps: &[f64], epsilon: f64) -> CdfShape {
    let trials = min_gaps.len().max(1) as f64;
    let band = 1.36 / trials.sqrt();
    let window = (0.1 * epsilon).min(empirical_quantile(min_gaps, 0.5));
    if !(window > 0.0) {
        let atom = min_gaps.iter().filter(|&&g| g <= 0.0).count() as f64 / trials;
        return CdfShape {
            window: 0.0,
            intercept: atom,
            slope: 0.0,
            band,
            max_excess: atom,
            consistent: false,
        };
    }
    let xs: Vec<f64> = (1..=CDF_GRID).map(|k| window / epsilon * k as f64 / CDF_GRID as f64).collect();
    let fs: Vec<f64> = xs
        .iter()
        .map(|&x| min_gaps.iter().filter(|&&g| g <= x * epsilon).count() as f64 / trials)
        .collect();
    let m = xs.len() as f64;
    let (mx, mf) = (xs.iter().sum::<f64>() / m, fs.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxf: f64 = xs.iter().zip(&fs).map(|(x, f)| (x - mx) * (f - mf)).sum();
    let slope = (sxf / sxx).max(0.0);
    let intercept = mf - slope * mx;
    let max_excess = xs
        .iter()
        .zip(&fs)
        .map(|(x, f)| f - (intercept + slope * x))
        .fold(f64::NEG_INFINITY, f64::max);
    CdfShape {
        window,
        intercept,
        slope,
        band,
        max_excess,
        consistent: max_excess <= band && intercept <= band,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::planted_nullity;

    #[test]
    fn two_by_two_zero_matrix() {
        let a = SparseMatrix::zeros(2, 2);
        let r = repulsion_experiment(&a, 0.5, 30, 4).unwrap();
        assert_eq!(r.nullity, 2);
        for (t, &g) in r.min_gaps.iter().enumerate() {
            let d = uniform_vec(&mut stream(4, Stream::Trial(t as u64)), 2);
            assert!((g - 0.5 * (d[0] - d[1]).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_epsilon_doubles_gaps() {
        let a = SparseMatrix::zeros(6, 6);
        let r1 = repulsion_experiment(&a, 1e-3, 20, 9).unwrap();
        let r2 = repulsion_experiment(&a, 2e-3, 20, 9).unwrap();
        for (g1, g2) in r1.min_gaps.iter().zip(&r2.min_gaps) {
            assert!((g2 - 2.0 * g1).abs() <= 1e-15 * g2.max(1.0));
        }
    }

    #[test]
    fn planted_problem_has_positive_quantiles() {
        let a = planted_nullity(60, 40, 5, 2);
        let r = repulsion_experiment(&a, 2f64.powi(-20), 100, 2).unwrap();
        assert_eq!(r.nullity, 5);
        assert!(r.min_gaps.iter().all(|&g| g >= 0.0));
        assert!(r.quantiles[0].1 > 0.0);
        assert!(r.quantiles[0].1 <= r.quantiles[1].1);
        assert!(cdf_shape_check(&r.min_gaps, r.epsilon).consistent);
    }

    #[test]
    fn rejects_small_nullity() {
        let a = SparseMatrix::from_diagonal(&[0.0, 1.0, 2.0]);
        assert!(repulsion_experiment(&a, 1e-3, 5, 1).is_err());
        let a = SparseMatrix::from_diagonal(&[0.0, 0.0, 1e-2]);
        assert!(repulsion_experiment(&a, 1e-3, 5, 1).is_err());
    }

    #[test]
    fn quantiles_follow_the_inverse_cdf() {
        let s = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(empirical_quantile(&s, 0.1), 1.0);
        assert_eq!(empirical_quantile(&s, 0.5), 3.0);
        assert_eq!(empirical_quantile(&s, 1.0), 5.0);
    }

    #[test]
    fn shape_check_flags_an_atom_at_zero() {
        let mut gaps = vec![0.0; 50];
        gaps.extend(vec![1.0; 50]);
        assert!(!cdf_shape_check(&gaps, 1.0).consistent);
        let uniform: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let shape = cdf_shape_check(&uniform, 1.0);
        assert!(shape.consistent && shape.window == 0.1);
        // A power law with exponent 1/4 rises far too steeply at zero.
        let steep: Vec<f64> = (1..=200).map(|i| (i as f64 / 200.0).powi(4)).collect();
        assert!(!cdf_shape_check(&steep, 1.0).consistent);
    }
}
