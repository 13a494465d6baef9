//! Seedable, splittable random streams.
//!
//! Every stochastic operation takes an explicit stream. A stream is a
//! ChaCha8 generator keyed by the run seed with a 64-bit stream id, so
//! independent consumers never share state and results do not depend on
//! the order in which streams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in configs and reports.
pub const GENERATOR: &str = "chacha8";

pub type Stream = ChaCha8Rng;

/// Well-known stream ids.
pub mod ids {
    pub const INIT: u64 = 1;
    pub const SPLITS: u64 = 2;
    pub const GRAPH: u64 = 3;
    /// Features for type `t` use `FEATURES + t`.
    pub const FEATURES: u64 = 1 << 16;
    /// Dropout in epoch `e` uses `DROPOUT + e`.
    pub const DROPOUT: u64 = 1 << 32;
}

pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
