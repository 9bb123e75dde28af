//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream derived from
//! the run seed, so adding draws in one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type HqrcRng = ChaCha8Rng;

/// Stream identifiers for the independent random components of a run.
pub mod stream {
    pub const RESERVOIR_WEIGHTS: u64 = 1;
    pub const MEASUREMENT_WEIGHTS: u64 = 2;
    pub const INPUT_WEIGHTS: u64 = 3;
    pub const RANDOM_BLOCKS: u64 = 4;
    pub const SHOTS: u64 = 5;
    pub const COHERENT_NOISE: u64 = 6;
    /// Encoding-layer matrices use `ENCODING_BASE + layer id`.
    pub const ENCODING_BASE: u64 = 1000;
}

pub fn seeded(seed: u64, stream: u64) -> HqrcRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
