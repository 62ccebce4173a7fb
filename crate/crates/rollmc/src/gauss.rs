//! Scalar Gaussian helpers shared by models, oracles and samplers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Log density of N(mean, var) at `x`; `-inf` for non-positive or non-finite
/// variance rather than NaN, so out-of-support parameters propagate as zero
/// density.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    if !(var > 0.0) || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + LN_2PI)
}

/// One draw from N(mean, var); `var` must be positive.
#[inline]
pub fn draw_normal(mean: f64, var: f64, rng: &mut ChaCha8Rng) -> f64 {
    debug_assert!(var > 0.0);
    let z: f64 = rng.sample(StandardNormal);
    mean + var.sqrt() * z
}
