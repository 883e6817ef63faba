//! Keyed random substreams.
//!
//! Every random decision in the pipeline draws from a ChaCha stream seeded by
//! SHA-256 over the run seed and a key naming the decision (stage, epoch,
//! utterance or parent id). Results therefore never depend on iteration
//! order or worker count.

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct Substream {
    tag: String,
    rng: ChaCha8Rng,
}

impl Substream {
    pub fn new(seed: u64, key: &[&str]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        for part in key {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        let digest: [u8; 32] = hasher.finalize().into();
        Self { tag: hex::encode(&digest[..8]), rng: ChaCha8Rng::from_seed(digest) }
    }

    /// Short hex identifier of this substream's key.
    pub fn tag(&self) -> &str {
        &self.tag
    }
}

impl RngCore for Substream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

impl CryptoRng for Substream {}
