//! Seeded, platform-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent sub-streams derived from one seed.
pub mod stream {
    pub const SYMBOLS: u64 = 1;
    pub const HOPS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const PREAMBLE: u64 = 4;
    pub const LINK: u64 = 5;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
