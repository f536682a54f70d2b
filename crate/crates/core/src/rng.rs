//! Seeded generator streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream derived
//! from the round seed, so adding draws in one subsystem never shifts the
//! sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const WORLD_STREAM: u64 = 0;
pub const SIM_STREAM: u64 = 1;
pub const SPAWN_STREAM: u64 = 2;
/// Bot streams start here and are offset by node id.
pub const BOT_STREAM_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
