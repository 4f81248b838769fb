//! Seed derivation. One master seed fans out into independent streams keyed
//! by `(trial, episode)`, so serial and parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `(trial, episode)` under `master`.
pub fn derive_seed(master: u64, trial: u64, episode: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ episode.rotate_left(32))
}

pub fn episode_rng(master: u64, trial: u64, episode: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, trial, episode))
}
