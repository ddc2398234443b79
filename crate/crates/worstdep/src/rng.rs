//! Deterministic random substreams.
//!
//! Every consumer of randomness draws from its own ChaCha20 stream keyed by
//! the master seed, a purpose tag and an index, so results do not depend on
//! how work is scheduled across threads.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Shared uniform block reused by every evaluation of a run.
pub const COMMON_UNIFORMS: u64 = 1;
/// Bootstrap replicates, indexed by record.
pub const BOOTSTRAP: u64 = 2;
/// Random grid designs, indexed by search iteration.
pub const GRID_DESIGN: u64 = 3;
/// Variable relabelings for restarts, indexed by restart.
pub const RELABELING: u64 = 4;

pub fn substream(seed: u64, tag: u64, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// `len` draws from the open interval (0, 1).
pub fn open_uniforms(seed: u64, tag: u64, index: u64, len: usize) -> Vec<f64> {
    let mut rng = substream(seed, tag, index);
    (0..len).map(|_| rng.sample(Open01)).collect()
}
