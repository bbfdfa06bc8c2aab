//! Seed splitting for reproducible parallel Monte-Carlo.
//!
//! Sample `i` of a run with master seed `s` draws from a ChaCha8 stream seeded
//! with `mix64(s + i)`, so results never depend on how samples are scheduled
//! across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sample `index` under `master`.
pub fn sample_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
