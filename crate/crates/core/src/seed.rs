//! Seed derivation.
//!
//! Every random stream in a run is derived from the master seed as
//! `child = hash64(parent, component, index)`, where `hash64` takes the first
//! eight bytes (little endian) of SHA-256 over
//! `parent.to_le_bytes() || component || 0x00 || index.to_le_bytes()`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn hash64(parent: u64, component: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(component.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

pub fn rng_from(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, component: &str, index: u64) -> SimRng {
    rng_from(hash64(parent, component, index))
}
