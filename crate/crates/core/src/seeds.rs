//! Seed derivation. Every random stream is a ChaCha8 generator keyed by a
//! hash of `(seed, tag)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hashes a base seed with a purpose tag into an independent 64-bit seed.
pub fn derive(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Seed of replicate `r`: `derive(seed, "replicate/r")`, so replicate
/// streams of different base seeds never coincide.
pub fn replicate(seed: u64, r: u64) -> u64 {
    derive(seed, &format!("replicate/{r}"))
}

pub fn rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}
