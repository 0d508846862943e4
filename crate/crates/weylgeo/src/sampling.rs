//! Deterministic sampling. Every randomized experiment in this crate draws
//! from a named generator (ChaCha12) seeded with a caller-supplied 64-bit
//! value, so a seed in a report is enough to reproduce the exact sample set.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// `count` points uniform in `[lo, hi]^dim`, coordinates drawn in row-major
/// order so the sequence is stable across platforms.
pub fn uniform_points(count: usize, dim: usize, lo: f64, hi: f64, seed: u64) -> Vec<DVector<f64>> {
    assert!(hi > lo, "empty sample box");
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(DVector::from_iterator(
            dim,
            (0..dim).map(|_| r.random_range(lo..hi)),
        ));
    }
    out
}
