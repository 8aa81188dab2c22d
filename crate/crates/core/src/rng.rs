//! Seeded random streams.
//!
//! Every consumer derives its generator from one 64-bit seed plus a stream
//! label, so independent consumers never share state and each one is
//! reproducible on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

/// Stream labels for the built-in consumers.
pub mod streams {
    pub const GENERATE: u64 = 1;
    pub const INIT: u64 = 2;
    pub const LOCATION: u64 = 3;
    pub const RATE: u64 = 4;
}

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for a sub-task `index` of `(seed, stream)`.
///
/// The word position is advanced so distinct indices read disjoint blocks of
/// the same keystream.
pub fn substream(seed: u64, stream: u64, index: u64) -> SeededRng {
    let mut rng = self::stream(seed, stream);
    // 2^36 words per sub-task
    rng.set_word_pos((index as u128) << 36);
    rng
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| gaussian(rng)).collect()
}
