//! Deterministic seed splitting.
//!
//! Every Monte Carlo consumer derives its generator from a root seed and a
//! path of indices (item, shot, resample, ...). Streams never depend on the
//! order in which work is scheduled, so parallel and sequential runs agree
//! bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(mix(seed) ^ mix(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Follows a path of indices down the seed tree.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &i| derive_seed(s, i))
}

/// Generator for substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, index))
}
