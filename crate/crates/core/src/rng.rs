//! Counter-based random streams.
//!
//! Each stream is a ChaCha8 generator keyed directly by `(seed, purpose,
//! index)`, so any row or iteration can be regenerated independently of the
//! order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PURPOSE_SPLIT: u64 = 1;
pub const PURPOSE_TEST_ROWS: u64 = 2;
/// Operating domain `d` uses purpose `PURPOSE_OPERATING_ROWS + d`.
pub const PURPOSE_OPERATING_ROWS: u64 = 1 << 16;

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
