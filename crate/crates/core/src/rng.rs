//! Seed derivation. Every random stream in the crate is a ChaCha8 generator whose
//! seed is a pure function of the caller's seed and a tuple of stream coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of stream coordinates.
pub fn hash_coords(coords: &[i64]) -> u64 {
    coords.iter().fold(0x51_7C_C1_B7_27_22_0A_95, |acc, &c| mix64(acc ^ mix64(c as u64)))
}

/// Per-cell seed for a probe sweep: `seed ⊕ hash(layer, position)`.
pub fn cell_seed(seed: u64, layer: u32, position: i32) -> u64 {
    seed ^ hash_coords(&[i64::from(layer), i64::from(position)])
}

pub fn stream(seed: u64, coords: &[i64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed ^ hash_coords(coords))
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
