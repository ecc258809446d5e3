//! Counter-based random streams.
//!
//! ChaCha8 is a counter-mode generator: a `(seed, stream)` pair addresses an
//! independent keystream, so trajectory `i` can draw from its own stream no
//! matter which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier stored in environment file headers.
pub const RNG_ID: &str = "chacha8-u64le-v1";

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the family keyed by `master_seed`.
pub fn substream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
