//! Seeded generators. Every random choice in the crate flows from a run seed
//! through [`stream_rng`], so a `(seed, stream)` pair fully determines it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hashing::{fnv1a64, mix64};

/// Seed for a named sub-stream of a run seed, e.g. `derive_seed(seed, "kmeans++")`.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    mix64(seed ^ fnv1a64(stream.as_bytes()))
}

pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
