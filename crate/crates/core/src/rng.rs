//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 stream keyed by a 64-bit seed
//! and a stream id derived from a tag path, so that independent consumers
//! (runs, users, epochs) never share state and results do not depend on the
//! order in which they are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Folds a tag path into a single 64-bit stream id (splitmix64 finaliser).
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    let mut h = seed ^ 0x6a09_e667_f3bc_c908;
    for &t in tags {
        h = mix(h ^ mix(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `seed` under `tags`.
pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive(seed, tags));
    rng
}

/// Tags used to separate streams by purpose.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const FORGERY_POOL: u64 = 4;
    pub const HEAD: u64 = 5;
    pub const WRITER: u64 = 6;
    pub const WORD: u64 = 7;
    pub const SAMPLE: u64 = 8;
}
