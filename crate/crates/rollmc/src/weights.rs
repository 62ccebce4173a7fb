//! Log-domain weight arithmetic.
//!
//! Importance weights are stored as unnormalized log weights throughout: a
//! rolling run multiplies thousands of increments together and would underflow
//! immediately in the linear domain. Zero weight is represented by `-inf`;
//! `NaN` is never a legal weight.

use crate::error::{Error, Result};

/// `log Σ exp(x_i)`, `-inf` when every entry is `-inf` or the slice is empty.
///
/// Exact on single-element slices: `log_sum_exp(&[x]) == x` bit for bit, which
/// the `M = 1` reduction of the block samplers relies on.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max; // empty, all -inf, or a +inf entry
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalized probabilities and the log normalizing constant of a log-weight
/// vector.
///
/// Returns `(p, log_sum)` with `p[i] = exp(logw[i] - log_sum)` and
/// `log_sum = log Σ exp(logw[i])`. Fails with [`Error::AllWeightsZero`] when
/// no entry is finite.
pub fn normalize(logw: &[f64]) -> Result<(Vec<f64>, f64)> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let mut probs: Vec<f64> = logw.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok((probs, max + total.ln()))
}

/// Effective sample size `1 / Σ p_i²` of a normalized weight vector.
///
/// Equals the number of particles for uniform weights and 1 when a single
/// particle carries all mass.
pub fn ess(probs: &[f64]) -> f64 {
    1.0 / probs.iter().map(|&p| p * p).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_two_equal_weights() {
        let (p, ls) = normalize(&[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((ls - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn normalize_four_equal_weights_any_level() {
        for c in [-700.0, -3.2, 0.0, 15.0, 700.0] {
            let (p, _) = normalize(&[c, c, c, c]).unwrap();
            for &pi in &p {
                assert!((pi - 0.25).abs() < 1e-15, "c={c} p={pi}");
            }
        }
    }

    #[test]
    fn normalize_hand_computed_ratio() {
        // weights 3:1
        let (p, ls) = normalize(&[3f64.ln(), 1f64.ln()]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
        assert!((ls - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn normalize_all_zero_is_an_error() {
        assert_eq!(
            normalize(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap_err(),
            Error::AllWeightsZero
        );
    }

    #[test]
    fn normalize_handles_zero_entries() {
        let (p, _) = normalize(&[0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn log_sum_exp_single_element_is_exact() {
        for x in [-1234.5, -1e-300, 0.0, 0.1, 567.8] {
            assert_eq!(log_sum_exp(&[x]), x);
        }
    }

    #[test]
    fn ess_uniform_and_degenerate() {
        let n = 1000;
        let probs = vec![1.0 / n as f64; n];
        assert!((ess(&probs) - n as f64).abs() < 1e-9);

        let mut point = vec![0.0; 8];
        point[3] = 1.0;
        assert!((ess(&point) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ess_hand_computed() {
        // 1/(0.25 + 0.0625 + 0.0625) = 8/3
        let e = ess(&[0.5, 0.25, 0.25]);
        assert!((e - 8.0 / 3.0).abs() < 1e-14);
    }

    proptest! {
        // Shift invariance: adding a constant to all log weights leaves the
        // normalized probabilities unchanged to 1e-12.
        #[test]
        fn normalize_shift_invariant(
            logs in proptest::collection::vec(-50f64..50.0, 1..40),
            shift in -600f64..600.0,
        ) {
            let (p0, ls0) = normalize(&logs).unwrap();
            let shifted: Vec<f64> = logs.iter().map(|&x| x + shift).collect();
            let (p1, ls1) = normalize(&shifted).unwrap();
            for (a, b) in p0.iter().zip(&p1) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((ls1 - ls0 - shift).abs() < 1e-9 * (1.0 + ls0.abs() + shift.abs()));
        }

        // Probabilities sum to one within 1e-12 and ESS lies in [1, N].
        #[test]
        fn normalize_sums_to_one_and_ess_in_range(
            logs in proptest::collection::vec(-300f64..300.0, 1..1000),
        ) {
            let (p, _) = normalize(&logs).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let e = ess(&p);
            prop_assert!(e >= 1.0 - 1e-12 && e <= p.len() as f64 * (1.0 + 1e-12));
        }
    }
}
