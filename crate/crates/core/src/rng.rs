//! Seed derivation. Every random stream is keyed by a label and the run seed,
//! so adding a new consumer never shifts an existing stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Sub-seed for `label` under the run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

pub fn stream(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// Independent counter-indexed substream, used to shard work across threads
/// without making output depend on the thread count.
pub fn substream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut rng = stream(seed, label);
    rng.set_stream(index);
    rng
}
