//! Splittable seed derivation.
//!
//! Every random draw in the toolkit comes from a [`ChaCha8Rng`] seeded by a
//! 64-bit value derived from a master seed plus a (stream, index) counter, so
//! work items can be evaluated in any order, on any thread, and still
//! reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams so unrelated consumers of one master seed never collide.
pub mod stream {
    pub const SCENE: u64 = 1;
    pub const CAMERA: u64 = 2;
    pub const SIM: u64 = 3;
    pub const MH: u64 = 4;
    pub const BOUNDARY: u64 = 5;
    pub const CALIBRATION: u64 = 6;
    pub const TRAIN: u64 = 7;
    pub const TEST: u64 = 8;
    pub const NOISE: u64 = 9;
    pub const PERTURB: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` for item `index` of `stream`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
