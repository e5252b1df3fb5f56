//! Counter-keyed random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose seed is a
//! hash of `(master seed, grid point, trial, block, stage)`, so results do
//! not depend on how trials are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pipeline stage that consumes randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Noise = 1,
    Permutation = 2,
    Measurement = 3,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of keys into a single 64-bit seed.
pub fn mix(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x6a09_e667_f3bc_c909, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Seed for one grid point of an experiment.
pub fn point_seed(master: u64, point: u64) -> u64 {
    mix(&[master, point])
}

pub fn stream(seed: u64, trial: u64, block: u64, stage: Stage) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = mix(&[seed, trial, block, stage as u64]);
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
