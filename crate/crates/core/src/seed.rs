//! Per-stream seed derivation.
//!
//! Every random stream is seeded with `derive(master, role, index)` and fed
//! to a ChaCha8 generator, so any record of an ensemble can be regenerated
//! on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the PRNG family, echoed in run manifests.
pub const PRNG_FAMILY: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    Emissions = 1,
    Thinning = 2,
    Detector = 3,
    OmegaDraw = 4,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, role: Role, index: u64) -> u64 {
    mix64(mix64(mix64(master) ^ role as u64) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
