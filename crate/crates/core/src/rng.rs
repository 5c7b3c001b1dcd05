//! Deterministic random stream management.
//!
//! Every random draw in the engine comes from a [`ChaCha8Rng`] whose 256-bit seed is
//! `SHA-256(master_seed_le || purpose_tag || 0x00 || index_le)`. A stream is therefore
//! identified by `(master seed, purpose tag, index)` alone, independent of the order in
//! which streams are created. Parallel evaluation cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Purpose tags used across the crate.
pub mod tags {
    pub const SOIL: &str = "soil";
    pub const FILTER: &str = "filter";
    pub const TRUTH: &str = "truth";
    pub const NOISE: &str = "noise";
    pub const PARTICLES: &str = "particles";
    pub const CE_SAMPLE: &str = "ce-sample";
    pub const CE_ITERATION: &str = "ce-iteration";
    pub const FINAL_EVAL: &str = "final-eval";
    pub const CE_RESTART: &str = "ce-restart";
    pub const SIMULATE: &str = "simulate";
}

fn digest(master: u64, tag: &str, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let out = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&out);
    seed
}

/// Random stream for `(master, tag, index)`.
pub fn stream(master: u64, tag: &str, index: u64) -> StreamRng {
    ChaCha8Rng::from_seed(digest(master, tag, index))
}

/// Child seed for `(master, tag, index)`, for APIs that take an integer seed.
pub fn child_seed(master: u64, tag: &str, index: u64) -> u64 {
    let d = digest(master, tag, index);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
