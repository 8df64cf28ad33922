//! Stable hashing helpers. Everything seeded in this crate derives its
//! randomness from these, so results do not depend on the standard
//! library's unstable `Hash` implementations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First eight bytes of the SHA-256 over the given parts, each part
/// terminated by a NUL so `("ab","c")` and `("a","bc")` differ.
pub fn stable_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
        hasher.update([0u8]);
    }
    let out = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&out[..8]);
    u64::from_be_bytes(word)
}

/// Derives an independent sub-seed for a named stream under a root seed.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    stable_u64(&[&seed.to_be_bytes(), stream.as_bytes()])
}

pub fn rng_for(seed: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Incremental SHA-256 over a sequence of records.
#[derive(Default)]
pub struct ContentHasher {
    inner: Sha256,
}

impl ContentHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.inner.update(bytes);
    }

    pub fn finish_hex(self) -> String {
        hex::encode(self.inner.finalize())
    }
}
