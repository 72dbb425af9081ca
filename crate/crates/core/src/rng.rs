//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes a `u64` seed and derives independent
//! streams from it, so results never depend on thread scheduling.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Stream identifiers used across the crate.
pub(crate) mod stream {
    pub const TEACHER_U: u64 = 1;
    pub const TEACHER_V: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const INPUTS: u64 = 4;
    pub const LABELS: u64 = 5;
    pub const STUDENT: u64 = 6;
}

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a base seed with an index (seed sweeps, bootstrap replicas).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_matrix(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> DMatrix<f64> {
    // Fill row-major so the draw order does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = StandardNormal.sample(rng);
            m[(i, j)] = std * z;
        }
    }
    m
}
