//! Seeded, stream-separated random number generators.
//!
//! Every consumer draws from `ChaCha8(seed)` on its own stream so that
//! serial and parallel runs see identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream offsets by purpose; the low bits carry the group index.
pub const SAMPLES: u64 = 0;
pub const INITIAL: u64 = 1 << 40;
pub const KICKS: u64 = 2 << 40;
pub const REINIT: u64 = 3 << 40;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
