//! Seeded randomness. All sampling in the crate goes through ChaCha8 seeded
//! from a caller-supplied `u64`, so a (input, seed) pair always reproduces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
