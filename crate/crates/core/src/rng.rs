//! Seeded random streams. Every consumer draws from its own ChaCha stream
//! of the master seed so that adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SCENARIO_STREAM: u64 = 0;
pub const FORMATION_STREAM: u64 = 1;
pub const SLOT_STREAM: u64 = 2;
pub const MOBILITY_STREAM: u64 = 3;
pub const EVENT_STREAM: u64 = 4;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
