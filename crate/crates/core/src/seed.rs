//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha generator keyed by a 64-bit
//! value mixed from a master seed and the coordinates of the work item, so
//! results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags keep derived seeds for different purposes apart.
pub(crate) const TAG_SYMBOLS: u64 = 0x5359_4d42;
pub(crate) const TAG_NOISE: u64 = 0x4e4f_4953;
pub(crate) const TAG_SPLIT: u64 = 0x5350_4c54;
pub(crate) const TAG_INIT: u64 = 0x494e_4954;
pub(crate) const TAG_SHUFFLE: u64 = 0x5348_4646;
pub(crate) const TAG_RUN: u64 = 0x5255_4e53;
