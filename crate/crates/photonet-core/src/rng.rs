//! Deterministic random streams.
//!
//! Every stochastic routine in this crate takes a single 64-bit master
//! seed. Work that is logically parallel (pulses, repetitions, noise per
//! spectrum curve) draws from an owned sub-stream whose seed is derived
//! from the master seed and a block index, so results are reproducible
//! bit-for-bit regardless of how the blocks are scheduled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

/// The RNG used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Create the stream for a master seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive the seed of an independent sub-stream from a master seed and a
/// block index (SplitMix64 finalizer over the mixed pair).
pub fn subseed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Sub-stream for block `index` of a master seed.
pub fn substream(master: u64, index: u64) -> Stream {
    stream(subseed(master, index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exponential draw with the given mean. A zero mean returns 0.
pub fn exponential(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Exp::new(1.0 / mean).expect("positive rate").sample(rng)
}

/// Poisson draw. A non-positive mean returns 0.
pub fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// Standard normal draw.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    Normal::new(0.0, 1.0).expect("valid").sample(rng)
}
