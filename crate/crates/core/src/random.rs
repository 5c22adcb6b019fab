//! Seedable randomness for nonces, tokens and identifiers.
//!
//! Every role owns a [`RandomSource`]. Under a fixed seed the whole run is
//! reproducible.

use std::sync::Mutex;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::encoding::b64url;

/// Bytes of entropy in nonces (128 bits).
pub const NONCE_BYTES: usize = 16;
/// Bytes of entropy in access and continuation tokens.
pub const TOKEN_BYTES: usize = 32;

#[derive(Debug)]
pub struct RandomSource(Mutex<ChaCha20Rng>);

impl RandomSource {
    /// Deterministic stream derived from `seed` and a per-role label.
    pub fn seeded(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_be_bytes());
        hasher.update(label.as_bytes());
        Self(Mutex::new(ChaCha20Rng::from_seed(hasher.finalize().into())))
    }

    pub fn from_os() -> Self {
        Self(Mutex::new(ChaCha20Rng::from_os_rng()))
    }

    pub fn fill(&self, buf: &mut [u8]) {
        self.0.lock().expect("rng lock").fill_bytes(buf);
    }

    /// `bytes` random bytes as unpadded base64url.
    pub fn token(&self, bytes: usize) -> String {
        let mut buf = vec![0u8; bytes];
        self.fill(&mut buf);
        b64url(&buf)
    }

    pub fn nonce(&self) -> String {
        self.token(NONCE_BYTES)
    }

    pub fn next_u64(&self) -> u64 {
        self.0.lock().expect("rng lock").next_u64()
    }
}
