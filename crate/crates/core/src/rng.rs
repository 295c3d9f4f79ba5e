//! Seeded random streams.
//!
//! Every replication owns one stream derived from `(seed, index)`, so results
//! do not depend on how replications are spread across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// Stream number `index` of the family identified by `seed`.
pub fn stream(seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
