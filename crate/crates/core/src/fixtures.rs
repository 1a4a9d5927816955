//! Seeded test problems with known null spaces.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::{block_qr, DenseBlock};
use crate::rng::{gaussian_block, stream, Stream};
use crate::sparse::SparseMatrix;

/// `diag(0, …, 0, 1, 2, …, 399)` with 21 leading zeros.
pub fn diagonal_test_matrix() -> SparseMatrix {
    let mut diag = vec![0.0; 21];
    diag.extend((1..=399).map(f64::from));
    SparseMatrix::from_diagonal(&diag)
}

/// Sparse `m × n` matrix whose last `nullity` columns are scaled copies of
/// earlier ones, so `dim null(A) = nullity` exactly.
///
/// The independent columns are `e_j` plus sparse noise of norm about
/// `0.3`, which keeps the smallest nonzero singular value away from zero.
pub fn planted_nullity(m: usize, n: usize, nullity: usize, seed: u64) -> SparseMatrix {
    assert!(m >= n && nullity <= n && (nullity == 0 || nullity < n));
    let mut rng = stream(seed, Stream::Trial(0));
    let base = n - nullity;
    let per_col = (m / 10).clamp(1, 8);
    let noise = 0.3 / (per_col as f64).sqrt();
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for j in 0..base {
        let mut col = vec![(j, 1.0)];
        for _ in 0..per_col {
            let g: f64 = rng.sample(StandardNormal);
            col.push((rng.random_range(0..m), noise * g));
        }
        columns.push(col);
    }
    for _ in 0..nullity {
        let src = rng.random_range(0..base);
        let s = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let copy = columns[src].iter().map(|&(i, v)| (i, s * v)).collect();
        columns.push(copy);
    }
    let trip: Vec<_> = columns
        .iter()
        .enumerate()
        .flat_map(|(j, col)| col.iter().map(move |&(i, v)| (i, j, v)))
        .collect();
    SparseMatrix::from_triplets(m, n, &trip).expect("indices are in range")
}

/// `Q diag(spectrum) Qᵀ` with a seeded Haar-like orthogonal `Q`, and `Q`.
pub fn dense_spsd(spectrum: &[f64], seed: u64) -> (DenseBlock, DenseBlock) {
    let n = spectrum.len();
    let g = gaussian_block(&mut stream(seed, Stream::Trial(1)), n, n);
    let q = block_qr(&g, None, &mut stream(seed, Stream::Trial(2)))
        .expect("square Gaussian blocks have full rank")
        .q;
    let mut qd = q.clone();
    for (j, &l) in spectrum.iter().enumerate() {
        qd.col_mut(j).iter_mut().for_each(|v| *v *= l);
    }
    let mut a = qd.matmul(&q.transpose());
    a.symmetrize();
    (a, q)
}

/// Random undirected graph with exactly `components` connected components
/// of sizes in `min_size..=max_size`. Each component is a random spanning
/// tree plus extra random edges; node ids are shuffled.
pub fn random_graph(components: usize, min_size: usize, max_size: usize, seed: u64) -> Vec<(u64, u64)> {
    assert!(min_size >= 2 && max_size >= min_size);
    let mut rng = stream(seed, Stream::Trial(3));
    let sizes: Vec<usize> = (0..components).map(|_| rng.random_range(min_size..=max_size)).collect();
    let total: usize = sizes.iter().sum();
    let mut ids: Vec<u64> = (0..total as u64).map(|i| 3 * i + 7).collect();
    ids.shuffle(&mut rng);
    let mut edges = Vec::new();
    let mut offset = 0;
    for &size in &sizes {
        let nodes = &ids[offset..offset + size];
        for i in 1..size {
            let j = rng.random_range(0..i);
            edges.push((nodes[i], nodes[j]));
        }
        for _ in 0..size {
            let (a, b) = (rng.random_range(0..size), rng.random_range(0..size));
            edges.push((nodes[a], nodes[b]));
        }
        offset += size;
    }
    edges.shuffle(&mut rng);
    edges
}
