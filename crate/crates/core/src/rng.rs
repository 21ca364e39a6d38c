//! Seeded random streams.
//!
//! A single user-facing seed drives several independent ChaCha streams so
//! that, for example, changing the number of training epochs never changes
//! the evaluation split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SYNTH: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_INIT: u64 = 3;
pub const STREAM_SAMPLING: u64 = 4;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
