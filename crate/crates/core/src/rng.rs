//! Seed fan-out.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a root
//! seed and a path of stream counters. The derivation is a SplitMix64 chain:
//! `s_0 = root`, `s_{i+1} = mix(s_i ^ mix(label_i + GOLDEN))`, so streams never
//! depend on how many values other streams consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `root` along `path`.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(root), |acc, &label| mix(acc ^ mix(label.wrapping_add(GOLDEN))))
}

/// Stream labels used across the crate. Kept in one place so that two
/// subsystems never share a stream by accident.
pub mod stream {
    pub const PARTICIPANT: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const BEHAVIOR: u64 = 3;
    pub const PEDESTRIANS: u64 = 4;
    pub const USER: u64 = 5;
    pub const IMPRESSION: u64 = 6;
    pub const QUERY_BUDGET: u64 = 7;
    pub const SPLIT: u64 = 10;
    pub const FOLD: u64 = 11;
    pub const INIT: u64 = 20;
    pub const SHUFFLE: u64 = 21;
    pub const DROPOUT: u64 = 22;
    pub const FOREST: u64 = 23;
    pub const RANDOM_BASELINE: u64 = 24;
    pub const GRID: u64 = 25;
    pub const GRADCHECK: u64 = 26;
}

pub fn rng_from(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

/// Stable 64-bit FNV-1a hash, used to key per-sample randomness by id.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
