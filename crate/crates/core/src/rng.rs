//! Counter-based random streams keyed by `(seed, n, replicate, purpose)`.
//!
//! Each key maps to its own ChaCha8 key, so tree randomness and mutation
//! randomness for a replicate are independent and any replicate can be
//! regenerated without running the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Tree = 0,
    Mutation = 1,
    Sampling = 2,
}

pub fn stream(seed: u64, n: u64, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&n.to_le_bytes());
    key[16..24].copy_from_slice(&replicate.to_le_bytes());
    key[24..].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
