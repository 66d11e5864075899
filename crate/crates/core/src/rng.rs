//! Seeded random sources.
//!
//! Every random draw in the crate flows through a [`RandomSource`]. Independent
//! lanes (per chain iteration, per observed cell, per replicate) get their own
//! substream derived from the master seed and a key path, so results do not
//! depend on thread count or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomSource = ChaCha8Rng;

/// Creates the root stream for a 64-bit seed.
pub fn from_seed(seed: u64) -> RandomSource {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from `seed` and a key path.
pub fn substream(seed: u64, keys: &[u64]) -> RandomSource {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}

/// Mixes a key path into a seed with splitmix64 finalization at every step.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x243f_6a88_85a3_08d3);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
