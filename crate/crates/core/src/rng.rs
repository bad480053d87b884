//! Seed handling.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`.
//! Derived streams (per channel, per Monte Carlo block, per crosstalk draw)
//! come from [`mix_seed`], a SplitMix64 finalizer applied to
//! `base ^ (index + 1) * GOLDEN`. The mapping is fixed so that results never
//! depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of sub-stream `index` from `base`.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used with [`mix_seed`] so that independent consumers of one
/// channel seed never share a stream.
pub mod stream {
    pub const CROSSTALK: u64 = 0xC805_57A1_4000_0001;
    pub const MONTE_CARLO: u64 = 0x3C00_0000_0000_0002;
    pub const PROPERTY: u64 = 0x7E57_0000_0000_0003;
}
