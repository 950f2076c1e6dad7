//! Child-seed derivation.
//!
//! Every random choice in the crate flows from one master seed. A stage gets
//! its own seed via `derive_seed(parent, stage, index)`, so instances can be
//! generated in any order (or in parallel) and still come out identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for child `index` of `stage` under `parent`.
pub fn derive_seed(parent: u64, stage: &str, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ fnv1a(stage)).wrapping_add(splitmix64(index)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
