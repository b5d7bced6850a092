//! Deterministic RNG streams.
//!
//! Every trial draws from its own ChaCha stream keyed by a hash of the master
//! seed and the trial index, so results do not depend on scheduling order.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

pub type TrialRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn trial_rng(master: u64, index: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

/// One draw from CN(0, variance): real and imaginary parts i.i.d. N(0, variance/2).
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    let s = (variance / T::lit(2.0)).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re) * s, T::lit(im) * s)
}
