//! Deterministic seeding helpers.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`
//! derived here, so results are reproducible independently of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for event `event_id` of a run seeded with `seed`.
pub fn event_seed(seed: u64, event_id: u64) -> u64 {
    seed ^ event_id
}

/// Derive an independent stream seed from a base seed and a list of tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(base), |acc, &t| mix64(acc ^ mix64(t)))
}
