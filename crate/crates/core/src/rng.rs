//! Seeded random streams.
//!
//! Every random quantity the solver draws comes from a ChaCha8 generator
//! keyed by the user seed and a fixed stream id, so runs are reproducible and
//! the streams never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense::DenseBlock;

/// Independent purposes a seed is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Diagonal,
    StartBlock,
    Breakdown,
    NormEstimate,
    Trial(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Diagonal => 1,
            Stream::StartBlock => 2,
            Stream::Breakdown => 3,
            Stream::NormEstimate => 4,
            Stream::Trial(t) => 1024 + t,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// Uniform samples on `[0, 1)`.
pub fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn gaussian_block<R: Rng + ?Sized>(rng: &mut R, nrows: usize, ncols: usize) -> DenseBlock {
    DenseBlock::from_col_major(nrows, ncols, gaussian_vec(rng, nrows * ncols))
        .expect("length matches by construction")
}
