//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a 64-bit seed. Child streams
//! are derived from a parent seed and a list of integer tags through the
//! SplitMix64 finalizer, so a trial's randomness depends only on its
//! coordinates and never on the order in which workers pick it up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all sampling.
pub type SampleRng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `base`: `base ⊕ index`.
#[inline]
pub fn trial_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Mixes `tags` into `parent`, one SplitMix64 round per tag.
pub fn derive(parent: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(parent), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` from a counter, 53 bits of mantissa.
#[inline]
pub fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
