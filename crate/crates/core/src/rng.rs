//! Seed derivation for reproducible, order-independent Monte-Carlo trials.
//!
//! Every stochastic routine takes an explicit `u64` seed. Trial seeds are
//! derived by mixing a master seed with a list of coordinates (detector tag,
//! grid index, trial index, ...) so that adding a cell to a sweep never
//! shifts the random streams of the other cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by all sample generators.
pub type SenseRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SenseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a of a string; stable across platforms and toolchains.
pub fn hash_tag(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mixes a master seed with an ordered list of coordinates.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}
