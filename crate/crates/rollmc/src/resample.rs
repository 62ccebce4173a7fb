//! Categorical sampling and resampling schemes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Inverse-CDF sampler over a fixed probability vector.
///
/// Builds the cumulative distribution once so repeated draws cost
/// `O(log M)`. Entries with probability zero are never selected.
pub struct CategoricalSampler {
    cum: Vec<f64>,
    last_positive: usize,
}

impl CategoricalSampler {
    pub fn new(probs: &[f64]) -> Self {
        debug_assert!(!probs.is_empty());
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in probs.iter().enumerate() {
            debug_assert!(p >= 0.0 && p.is_finite());
            if p > 0.0 {
                last_positive = i;
            }
            acc += p;
            cum.push(acc);
        }
        Self { cum, last_positive }
    }

    /// Draw one index; consumes exactly one uniform.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let target = u * self.cum[self.cum.len() - 1];
        let idx = self.cum.partition_point(|&c| c <= target);
        idx.min(self.last_positive)
    }
}

/// One categorical draw from `probs`.
pub fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    CategoricalSampler::new(probs).sample(rng)
}

/// `count` i.i.d. categorical draws (multinomial resampling); ancestor `i`
/// appears `count · p_i` times in expectation.
pub fn multinomial_resample(probs: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let sampler = CategoricalSampler::new(probs);
    (0..count).map(|_| sampler.sample(rng)).collect()
}

/// Systematic resampling: a single uniform offset with stratified spacing.
/// Lower-variance alternative for the outer resample step.
pub fn systematic_resample(probs: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let sampler = CategoricalSampler::new(probs);
    let total = sampler.cum[sampler.cum.len() - 1];
    let offset: f64 = rng.gen::<f64>() / count as f64;
    let mut out = Vec::with_capacity(count);
    let mut idx = 0usize;
    for k in 0..count {
        let target = (offset + k as f64 / count as f64) * total;
        while idx < sampler.cum.len() - 1 && sampler.cum[idx] <= target {
            idx += 1;
        }
        out.push(idx.min(sampler.last_positive));
    }
    out
}
