//! Seeded random streams.
//!
//! Every run owns one [`SimRng`]. Run `k` of an ensemble with master seed
//! `s` is seeded with `run_seed(s, k)`:
//!
//! ```text
//! z = s + (k + 1) * 0x9E3779B97F4A7C15          (wrapping)
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! i.e. the SplitMix64 output for state `s` advanced `k + 1` times. The
//! resulting 64-bit value seeds a ChaCha8 generator through
//! `SeedableRng::seed_from_u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_seed(master: u64, run: u64) -> u64 {
    splitmix64(master.wrapping_add(run.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
