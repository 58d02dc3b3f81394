//! Seed derivation.
//!
//! Every random draw in a run comes from a ChaCha8 generator keyed by the
//! master seed. Session `k` of sweep cell `c` reads ChaCha stream
//! `(c << 32) | k`, so any single session can be replayed in isolation from
//! `(master_seed, cell, session)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_id(cell: u32, session: u32) -> u64 {
    (u64::from(cell) << 32) | u64::from(session)
}

pub fn session_rng(master_seed: u64, cell: u32, session: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(cell, session));
    rng
}
