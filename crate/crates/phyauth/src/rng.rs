//! Hierarchical deterministic randomness.
//!
//! Experiments fan out into many independent trials. Each trial gets its own
//! generator derived from `(master_seed, label, indices)`, so a sweep
//! produces bit-identical results whether its trials run in parallel or one
//! after another, and regardless of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child generator from a master seed, a domain label and a path
/// of indices (for example `(seed, "fer-trial", &[point, trial])`).
pub fn derive_rng(master_seed: u64, label: &str, path: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for idx in path {
        hasher.update(idx.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
