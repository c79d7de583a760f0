//! Seeded generator used everywhere a run needs randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable, seedable generator. Streams are stable across platforms.
pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
