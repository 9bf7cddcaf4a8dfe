//! Labelled seed derivation.
//!
//! Every sampling site asks for its own stream keyed by `(seed, label, index)`.
//! Streams are ChaCha8 generators seeded from a SHA-256 of the key, so the
//! values drawn at one site never depend on how many draws another site made
//! or on which thread ran first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Generator for a named sampling site.
pub fn stream(seed: u64, label: &str) -> StreamRng {
    substream(seed, label, 0)
}

/// Generator for the `index`-th item of a named sampling site.
pub fn substream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Derive a child seed, for handing a sub-component its own global seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    stream(seed, label).next_u64()
}
