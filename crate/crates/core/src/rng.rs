//! Deterministic randomness.
//!
//! All randomness in a run flows from the single configured seed
//! through named substreams, so that individual components (channel
//! draws, user placement, phase initialization) can be re-randomized
//! independently without disturbing the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Substream labels used by the library.
pub const STREAM_CHANNEL: &str = "channel";
pub const STREAM_USERS: &str = "users";
pub const STREAM_PHASE_INIT: &str = "phase-init";

/// Derives an independent RNG for `(seed, label)`. The mapping is a
/// pure function of its inputs, so regeneration is bit-reproducible.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
