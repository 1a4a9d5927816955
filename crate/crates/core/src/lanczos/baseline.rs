use crate::dense::{block_qr, sym_eig, DenseBlock};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::sparse::PerturbedOperator;

/// Output of the unrestarted reference iteration.
#[derive(Debug, Clone)]
pub struct BaselineOutput {
    /// Orthonormal Krylov basis `[Q₁ … Q_ℓ]`.
    pub z: DenseBlock,
    /// Block tridiagonal `ZᵀBZ`.
    pub t: DenseBlock,
    /// Ascending eigenvalues of `t`.
    pub ritz_values: Vec<f64>,
    /// `Z · V_Z(:, :nullity)`.
    pub v: DenseBlock,
}

/// Plain randomized block Lanczos for a fixed number of steps with full
/// reorthogonalization and a known target dimension.
///
/// Stops early when the Krylov space fills `Rⁿ`.
pub fn baseline_block_lanczos(
    b: &PerturbedOperator,
    omega: &DenseBlock,
    steps: usize,
    nullity: usize,
    seed: u64,
) -> Result<BaselineOutput> {
    let n = b.dim();
    let d = omega.ncols();
    if omega.nrows() != n || d == 0 {
        return Err(Error::DimensionMismatch("start block does not fit the operator".into()));
    }
    let mut rng = stream(seed, Stream::Breakdown);
    let mut z = block_qr(omega, None, &mut rng)?.q;
    let mut alphas: Vec<DenseBlock> = Vec::new();
    let mut gammas: Vec<DenseBlock> = Vec::new();

    for j in 0..steps {
        let lo = j * d;
        let q = z.cols_owned(lo..lo + d);
        let mut w = b.apply(&q)?;
        if j > 0 {
            z.cols(lo - d..lo)
                .sub_matmul_from(&gammas[j - 1].transpose(), &mut w);
        }
        let mut alpha = q.tr_matmul(&w);
        alpha.symmetrize();
        q.view().sub_matmul_from(&alpha, &mut w);
        alphas.push(alpha);
        if lo + 2 * d > n {
            break;
        }
        let qr = block_qr(&w, Some(z.view()), &mut rng)?;
        gammas.push(qr.r);
        z.push_cols(qr.q.view());
    }

    let dim = alphas.len() * d;
    z.truncate_cols(dim);
    let mut t = DenseBlock::zeros(dim, dim);
    for (j, a) in alphas.iter().enumerate() {
        t.set_submatrix(j * d, j * d, a);
        if j + 1 < alphas.len() {
            t.set_submatrix((j + 1) * d, j * d, &gammas[j]);
            t.set_submatrix(j * d, (j + 1) * d, &gammas[j].transpose());
        }
    }
    t.symmetrize();
    let eig = sym_eig(&t)?;
    let k = nullity.min(dim);
    let v = z.matmul(&eig.eigenvectors.cols_owned(0..k));
    Ok(BaselineOutput {
        z,
        t,
        ritz_values: eig.eigenvalues,
        v,
    })
}
