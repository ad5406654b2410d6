//! Named random streams derived from one master seed.
//!
//! `derive_seed(master, name, index)` is the first eight bytes
//! (little-endian) of `SHA-256(master_le || name || 0x00 || index_le)`.
//! Re-seeding one stream never disturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn derive_seed(master: u64, name: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(name.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, name: &str, index: u64) -> StreamRng {
    rng_from_seed(derive_seed(master, name, index))
}
