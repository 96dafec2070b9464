//! Seed derivation. Every random stream in a run is keyed by
//! `sha256(parent_seed_le ‖ label)`, so adding a consumer never shifts the
//! numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn digest(parent: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// Child seed for the stream named `label`.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let d = digest(parent, label);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Generator for the stream named `label`.
pub fn stream(parent: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(parent, label))
}
