//! Deterministic randomness.
//!
//! Every random choice in a run comes from a ChaCha8 stream whose seed is
//! derived from the run seed and a path of integer tags (trial index, purpose,
//! system number). Identical seeds therefore give identical transcripts
//! regardless of how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for [`derive_seed`].
pub mod purpose {
    pub const SECRET: u64 = 1;
    pub const PROTOCOL: u64 = 2;
    pub const MEASUREMENT: u64 = 3;
    pub const EVE: u64 = 4;
    pub const SAMPLING: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `tag` into `base`; distinct tags give statistically independent seeds.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn derive_path(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(base, |acc, &t| derive_seed(acc, t))
}

pub fn sim_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
