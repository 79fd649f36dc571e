//! Seeded random streams. Every random draw in the crate goes through
//! [`rng_from_seed`], and per-trial seeds are derived from a master seed by a
//! counter-based splitter so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type BlockRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> BlockRng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream`, counter `index` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}
