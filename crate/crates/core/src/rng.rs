//! Seed plumbing. Every random stage takes a `u64` derived from the master
//! seed, so folds and ensemble members can be reproduced independently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer applied to `seed + stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named streams so different stages never share a seed.
pub mod stream {
    pub const FOLDS: u64 = 1;
    pub const CLASSIFIER: u64 = 2;
    pub const BACKGROUND: u64 = 3;
    pub const EXPLAIN: u64 = 4;
    pub const FOLD_BASE: u64 = 1000;
}
