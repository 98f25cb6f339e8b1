//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by a
//! purpose tag and up to two indices, so results do not depend on how jobs
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different consumers disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Chain = 1,
    Network = 2,
    Sample = 3,
    Folds = 4,
}

/// Derive an independent stream from the master seed.
pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 8 bits purpose, 28 bits each for the indices.
    let id = ((purpose as u64) << 56) | ((a & 0x0fff_ffff) << 28) | (b & 0x0fff_ffff);
    rng.set_stream(id);
    rng
}
