//! Counter-based seed derivation.
//!
//! Every stochastic stage of the pipeline draws its seed from the root seed
//! with `derive(root, stage, index)`: the stage constant and the index are
//! packed into one counter that is added to the root and passed through the
//! SplitMix64 finalizer. Stages can therefore be rerun in isolation and still
//! see the same random stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage identifiers used as the high word of the derivation counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Orbit = 1,
    Plant = 2,
    ModelBank = 3,
    Split = 4,
    Classifier = 5,
    KFold = 6,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for `index` within `stage` from the root seed.
pub fn derive(root: u64, stage: Stage, index: u64) -> u64 {
    let counter = ((stage as u64) << 32) | (index & 0xFFFF_FFFF);
    splitmix64(root.wrapping_add(counter.wrapping_mul(GOLDEN)))
}

/// Deterministic RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
