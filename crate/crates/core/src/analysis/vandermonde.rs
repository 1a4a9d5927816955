use super::check_distinct;
use crate::dense::{chebyshev_eval, pinv, spectral_norm, DenseBlock};
use crate::error::{Error, Result};

/// `min_{i<N} (λ_{i+1} − λ_i) / (λ_n − λ_1)`; infinite for `N = 1`.
pub fn spectral_gap(eigs: &[f64], nullity: usize) -> f64 {
    let spread = eigs[eigs.len() - 1] - eigs[0];
    (1..nullity)
        .map(|i| (eigs[i] - eigs[i - 1]) / spread)
        .fold(f64::INFINITY, f64::min)
}

/// `√(n−N)/(t−1)! · (2/gap)^{t−1}`, evaluated in log space.
pub fn vandermonde_bound(n: usize, nullity: usize, t: usize, gap: f64) -> f64 {
    let rest = (n - nullity) as f64;
    if t == 1 {
        return rest.sqrt();
    }
    let k = (t - 1) as f64;
    let log_fact: f64 = (2..t).map(|i| (i as f64).ln()).sum();
    (0.5 * rest.ln() - log_fact + k * (2.0 / gap).ln()).exp()
}

/// `‖Van_⊥ Van_N^†‖` for the `t`-column Vandermonde matrices of the
/// leading `N` eigenvalues and of the rest.
///
/// The ratio depends only on the polynomial space `P_{t−1}`, not on its
/// basis, so the columns are Chebyshev polynomials on `[λ_1, λ_n]` rather
/// than monomials. That keeps `Van_N` well conditioned for moderate `t`.
pub fn vandermonde_ratio(eigs: &[f64], nullity: usize, t: usize) -> Result<f64> {
    let n = eigs.len();
    if nullity == 0 || nullity >= n {
        return Err(Error::InvalidArgument(format!("need 0 < N < n, got N = {nullity}, n = {n}")));
    }
    if t == 0 || t > nullity {
        return Err(Error::InvalidArgument(format!("need 1 <= t <= N, got t = {t}")));
    }
    if eigs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("eigenvalues must be ascending".into()));
    }
    check_distinct(eigs, nullity)?;
    let (lo, hi) = (eigs[0], eigs[n - 1]);
    let map = |l: f64| if hi > lo { (2.0 * l - lo - hi) / (hi - lo) } else { 0.0 };
    let van = |rows: &[f64]| DenseBlock::from_fn(rows.len(), t, |i, k| chebyshev_eval(k as u32, map(rows[i])));
    let van_n = van(&eigs[..nullity]);
    let van_perp = van(&eigs[nullity..]);
    let (inv, rank) = pinv(&van_n, 1e-14)?;
    if rank < t {
        return Err(Error::RankDeficient(format!("Vandermonde block has rank {rank} < {t}")));
    }
    Ok(spectral_norm(&van_perp.matmul(&inv)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, uniform_vec, Stream};

    #[test]
    fn single_column_is_all_ones() {
        let eigs = [0.0, 0.3, 0.7, 1.0, 2.0, 5.0];
        for nullity in 1..5 {
            let r = vandermonde_ratio(&eigs, nullity, 1).unwrap();
            let want = ((6 - nullity) as f64 / nullity as f64).sqrt();
            assert!((r - want).abs() < 1e-13, "{r} vs {want}");
            assert!(r <= vandermonde_bound(6, nullity, 1, spectral_gap(&eigs, nullity)));
        }
    }

    #[test]
    fn small_spectrum_matches_monomial_evaluation() {
        let eigs = [0.0, 0.5, 1.0, 2.0, 3.0];
        let r = vandermonde_ratio(&eigs, 2, 2).unwrap();
        // Monomial basis directly: rows [1, λ].
        let vn = DenseBlock::from_rows(&[&[1.0, 0.0], &[1.0, 0.5]]);
        let vp = DenseBlock::from_rows(&[&[1.0, 1.0], &[1.0, 2.0], &[1.0, 3.0]]);
        let (inv, _) = pinv(&vn, 1e-14).unwrap();
        let direct = spectral_norm(&vp.matmul(&inv));
        assert!((r - direct).abs() < 1e-10 * direct);
        let gap = spectral_gap(&eigs, 2);
        assert!((gap - 0.5 / 3.0).abs() < 1e-15);
        assert!(r <= vandermonde_bound(5, 2, 2, gap));
    }

    #[test]
    fn random_spectra_respect_the_bound() {
        for draw in 0..20 {
            let mut rng = stream(draw, Stream::Trial(0));
            let mut eigs = uniform_vec(&mut rng, 40);
            eigs.iter_mut().for_each(|v| *v *= 3.0);
            eigs.sort_by(f64::total_cmp);
            let nullity = 2 + (draw as usize % 6);
            let gap = spectral_gap(&eigs, nullity);
            for t in 1..=nullity {
                let r = vandermonde_ratio(&eigs, nullity, t).unwrap();
                let b = vandermonde_bound(40, nullity, t, gap);
                assert!(r <= b, "draw {draw}, t {t}: {r} > {b}");
            }
        }
    }

    #[test]
    fn bad_inputs() {
        let eigs = [0.0, 0.0, 1.0, 2.0];
        assert!(vandermonde_ratio(&eigs, 2, 1).is_err());
        assert!(vandermonde_ratio(&[0.0, 1.0, 2.0], 2, 3).is_err());
        assert!(vandermonde_ratio(&[0.0, 1.0, 2.0], 3, 1).is_err());
        assert!(vandermonde_ratio(&[1.0, 0.0, 2.0], 1, 1).is_err());
    }
}
