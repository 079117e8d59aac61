//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit 64-bit seed and builds its own
//! ChaCha8 generator, so results never depend on call order or threading.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for `(seed, stream)`.
#[inline]
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream))
}

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream_id))
}

/// Uniform on `[lo, hi)`.
#[inline]
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard normal via Box-Muller (one value per call).
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // 1 - u lies in (0, 1], keeping the log finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

// Stream identifiers.
pub(crate) const STREAM_PARAMS: u64 = 1;
pub(crate) const STREAM_FIELD: u64 = 2;
pub(crate) const STREAM_PHANTOM: u64 = 3;
pub(crate) const STREAM_NOISE: u64 = 4;
pub(crate) const STREAM_INIT: u64 = 5;
pub(crate) const STREAM_SHUFFLE: u64 = 6;
