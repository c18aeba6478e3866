//! Seed derivation.
//!
//! Every random stream in the crate is derived from a single base seed plus a
//! component label and a list of indices. The derivation hashes the
//! little-endian encoding of `base`, the UTF-8 label, and each index with
//! SHA-256 and takes the first eight bytes as a little-endian `u64`. Streams
//! are therefore attached to *identity* (round, shard, epoch) rather than to
//! execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `base`, a label and a list of indices.
pub fn derive(base: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// A ChaCha8 generator seeded from [`derive`].
pub fn rng(base: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, label, indices))
}
