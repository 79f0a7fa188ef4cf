//! Seed derivation for reproducible parallel sampling.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, replica, lane)`: the key is expanded from `seed`, the ChaCha stream
//! id is the replica index, and each lane starts at its own `2^64`-word offset
//! inside that stream. Lanes are used for path coordinates, so coordinate `c`
//! of replica `r` always sees the same numbers regardless of which worker
//! thread computes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of disjoint lanes per `(seed, replica)` stream.
pub const MAX_LANES: u64 = 16;

pub fn stream(seed: u64, replica: u64, lane: u64) -> ChaCha8Rng {
    assert!(lane < MAX_LANES, "lane {lane} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng.set_word_pos(u128::from(lane) << 64);
    rng
}
