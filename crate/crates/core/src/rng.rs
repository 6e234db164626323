//! Per-path random streams.
//!
//! Every sampled path draws from its own ChaCha8 stream selected by the path
//! index, so results do not depend on how paths are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The stream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
