//! Seeded counter-based random streams.
//!
//! A stream is identified by `(base, stream)`. ChaCha20 is a counter-mode
//! cipher, so every stream is an independent, platform-independent sequence
//! and replicates can be generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Stream ids used by the pipeline stages.
pub mod streams {
    pub const SAMPLE: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const QUADRATURE: u64 = 2;
    pub const EMBEDDING: u64 = 3;
}

pub fn seeded_rng(base: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng
}
