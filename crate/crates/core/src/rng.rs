//! Deterministic seeding.
//!
//! Every Monte Carlo trial draws from its own generator, seeded by
//! [`trial_seed`]`(master, trial)`. The mixing function is two rounds of
//! SplitMix64:
//!
//! ```text
//! trial_seed(m, t) = splitmix64(m ^ splitmix64(t + 0x9E3779B97F4A7C15))
//! ```
//!
//! so results depend only on `(master, trial)` and never on which thread ran
//! the trial or in what order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used for all sampling.
pub type SimRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial.wrapping_add(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Generator for trial `trial` of an experiment with master seed `master`.
pub fn trial_rng(master: u64, trial: u64) -> SimRng {
    rng_from_seed(trial_seed(master, trial))
}
