//! Seed plumbing. Every random stream in a run is derived from the scenario
//! seed so that one seed reproduces the whole day.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for a named stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(stream.wrapping_add(0x5EED)))
}

/// Uniform draw in `[0, 1)` that depends only on the key, not on call order.
pub fn keyed_unit(seed: u64, a: u64, b: u64) -> f64 {
    let h = mix64(derive_seed(seed, a) ^ mix64(b));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

pub mod streams {
    pub const DEMAND: u64 = 1;
    pub const EXOGENOUS: u64 = 2;
    pub const FORECAST_NOISE: u64 = 3;
    pub const TRAINING: u64 = 4;
    pub const HISTORY: u64 = 5;
}
