//! Backward block sampling: one conditional-SMC move, run in reverse time,
//! over the oldest `K+1` states of a single outer particle.
//!
//! Given the current head `α_{s−1:s+K−1}` and the conditioning state
//! `α_{s+K}`, candidates are grown from time `s+K−1` down to `s−1` against the
//! time-reversed factorization of the joint (backward prior × leverage-form
//! observation density). The lineage is selected at time `s`, not `s−1`, so
//! the returned head has already forgotten the oldest state, and the weight
//! by-product
//!
//! ```text
//! p̂(y_{s−1} | y_{s:t}, α_{s+K}, θ) = (1/M) Σ_m v_{s−1}(α^m_{s−1}, α^{a_m}_s)
//! ```
//!
//! *divides* the particle's weight: removing the oldest observation discounts
//! the information it contributed. Its inverse is unbiased for the inverse
//! conditional likelihood, and it depends on the trajectory only through
//! `α_{s+K}`.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Ssm;
use crate::resample::CategoricalSampler;
use crate::weights::{log_sum_exp, normalize};

/// Outcome of one backward block move.
#[derive(Debug, Clone)]
pub struct BackwardBlockResult<S> {
    /// States for times `s..=s+K−1` (`α_{s−1}` is discarded, so the length is
    /// exactly `K`). When the move aborts this is the pinned path minus its
    /// oldest state.
    pub head: Vec<S>,
    /// `log p̂(y_{s−1} | y_{s:t}, α_{s+K}, θ)`. The caller must set the
    /// particle weight to `log W − log_phat_old`, or to zero weight when this
    /// is `−inf`.
    pub log_phat_old: f64,
}

/// `log v_j` of the reverse pass:
/// `log p(α_j | α_{j+1}, θ) + log g_θ(y_j | α_j, α_{j+1}) − log q_j(α_j | α_{j+1}, y_j)`,
/// grouped as `(p − q) + g` so backward-prior proposals cancel exactly.
pub fn log_inner_weight_backward<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    j: usize,
    state: &M::State,
    next: &M::State,
    y: &M::Obs,
) -> f64 {
    let bp = model.log_backward_prior(state, next, theta);
    let q = model.log_backward_proposal(j, state, next, y, theta);
    (bp - q) + model.log_obs(y, state, Some(next), theta)
}

/// Smoother weights of the reverse pass at time `j`:
/// `V̄^m ∝ V^m · p(α^{k*}_{j−1} | α^m_j, θ)`, normalized.
pub fn smoother_weights_backward<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    v_probs: &[f64],
    candidates: &[M::State],
    selected_prev: &M::State,
) -> Result<Vec<f64>> {
    debug_assert_eq!(v_probs.len(), candidates.len());
    let logp: Vec<f64> = candidates
        .iter()
        .map(|c| model.log_backward_prior(selected_prev, c, theta))
        .collect();
    let max = logp
        .iter()
        .zip(v_probs)
        .filter(|(lp, &v)| lp.is_finite() && v > 0.0)
        .map(|(lp, _)| *lp)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let mut w: Vec<f64> = logp
        .iter()
        .zip(v_probs)
        .map(|(&lp, &v)| if lp.is_finite() && v > 0.0 { v * (lp - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct BackwardTrace<S> {
    /// `states[j][m]`: candidate at time `s − 1 + j`.
    pub states: Vec<Vec<S>>,
    pub vprobs: Vec<Vec<f64>>,
    /// `parents[j][m]` for `j < K`: index in row `j+1` the candidate hangs off.
    pub parents: Vec<Vec<usize>>,
    /// Selected indices for rows `1..=K` (row 0 is never selected).
    pub ksel: Vec<usize>,
}

enum BackwardOutcome<S> {
    Done(BackwardTrace<S>, f64),
    Dead,
}

fn run_backward<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    pinned: &[M::State],
    next: &M::State,
    data: &[M::Obs],
    s: usize,
    m_inner: usize,
    use_smoother: bool,
    rng: &mut ChaCha8Rng,
) -> Result<BackwardOutcome<M::State>> {
    let kk = pinned.len().checked_sub(1).expect("pinned head must not be empty");
    assert!(kk >= 1, "backward block needs at least K = 1");
    assert!(m_inner >= 1);
    assert!(s >= 2, "removal needs a previous observation");
    assert!(data.len() >= s + kk - 1, "window must contain the head observations");

    let y_at = |time: usize| &data[time - 1];

    let mut states: Vec<Vec<M::State>> = vec![Vec::new(); kk + 1];
    let mut vprobs: Vec<Vec<f64>> = vec![Vec::new(); kk + 1];
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); kk + 1];

    let mut log_v_first: Vec<f64> = Vec::new();
    for j in (0..=kk).rev() {
        let time = s - 1 + j;
        let y = y_at(time);
        let mut row: Vec<M::State> = Vec::with_capacity(m_inner);
        let mut row_parents: Vec<usize> = Vec::with_capacity(m_inner);
        let mut logv: Vec<f64> = Vec::with_capacity(m_inner);
        let sampler =
            if j < kk { Some(CategoricalSampler::new(&vprobs[j + 1])) } else { None };
        for m in 0..m_inner {
            let (parent_idx, state) = if j == kk {
                let st = if m == 0 {
                    pinned[kk].clone()
                } else {
                    model.sample_backward_proposal(time, next, y, theta, rng)
                };
                (0usize, st)
            } else if m == 0 {
                (0, pinned[j].clone())
            } else {
                let a = sampler.as_ref().unwrap().sample(rng);
                let st =
                    model.sample_backward_proposal(time, &states[j + 1][a], y, theta, rng);
                (a, st)
            };
            if !model.state_is_valid(&state) {
                return Err(Error::DegenerateProposal);
            }
            let parent_state: &M::State =
                if j == kk { next } else { &states[j + 1][parent_idx] };
            logv.push(log_inner_weight_backward(model, theta, time, &state, parent_state, y));
            row.push(state);
            row_parents.push(parent_idx);
        }
        states[j] = row;
        parents[j] = row_parents;
        match normalize(&logv) {
            Ok((p, _)) => vprobs[j] = p,
            Err(Error::AllWeightsZero) => return Ok(BackwardOutcome::Dead),
            Err(e) => return Err(e),
        }
        if j == 0 {
            log_v_first = logv;
        }
    }

    let log_phat_old = log_sum_exp(&log_v_first) - (m_inner as f64).ln();

    // Select at time s (row 1) and derive the rest of the lineage upward.
    let mut ksel = vec![0usize; kk + 1];
    ksel[1] = CategoricalSampler::new(&vprobs[1]).sample(rng);
    for j in 1..kk {
        ksel[j + 1] = parents[j][ksel[j]];
    }
    if use_smoother {
        for j in 2..=kk {
            let w = smoother_weights_backward(
                model,
                theta,
                &vprobs[j],
                &states[j],
                &states[j - 1][ksel[j - 1]],
            )?;
            ksel[j] = CategoricalSampler::new(&w).sample(rng);
        }
    }

    Ok(BackwardOutcome::Done(BackwardTrace { states, vprobs, parents, ksel }, log_phat_old))
}

/// One backward block move. `pinned` holds the current states for times
/// `s−1..=s+K−1` (so `K = pinned.len() − 1`), `next` is the conditioning
/// state `α_{s+K}`, and `data` the full observation record (`data[j]` is the
/// observation at time `j+1`). Only `y_{s−1:s+K−1}` is read: the increment is
/// local to the block.
#[allow(clippy::too_many_arguments)]
pub fn backward_block_move<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    pinned: &[M::State],
    next: &M::State,
    data: &[M::Obs],
    s: usize,
    m_inner: usize,
    use_smoother: bool,
    rng: &mut ChaCha8Rng,
) -> Result<BackwardBlockResult<M::State>> {
    match run_backward(model, theta, pinned, next, data, s, m_inner, use_smoother, rng)? {
        BackwardOutcome::Done(trace, log_phat_old) => {
            let head = (1..trace.ksel.len())
                .map(|j| trace.states[j][trace.ksel[j]].clone())
                .collect();
            Ok(BackwardBlockResult { head, log_phat_old })
        }
        BackwardOutcome::Dead => {
            Ok(BackwardBlockResult { head: pinned[1..].to_vec(), log_phat_old: f64::NEG_INFINITY })
        }
    }
}

#[cfg(test)]
pub(crate) fn backward_block_move_traced<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    pinned: &[M::State],
    next: &M::State,
    data: &[M::Obs],
    s: usize,
    m_inner: usize,
    use_smoother: bool,
    rng: &mut ChaCha8Rng,
) -> Option<BackwardTrace<M::State>> {
    match run_backward(model, theta, pinned, next, data, s, m_inner, use_smoother, rng).unwrap() {
        BackwardOutcome::Done(trace, _) => Some(trace),
        BackwardOutcome::Dead => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::{
        conditional_log_predictive, kalman_filter, kalman_smoother, simulation_smoother, Ar1Ssm,
        FilterInit,
    };
    use crate::models::linear_gaussian::{LgModel, LgProposal, LgTheta};
    use crate::rng::{RngStream, StreamPhase};

    fn rng(seed: u64) -> ChaCha8Rng {
        RngStream::new(seed).global(0, StreamPhase::Oracle)
    }

    /// Exact draw of α_{s−1:s+K−1} given α_{s+K} and y_{s−1:s+K−1}: run the
    /// simulation smoother on the time-reversed model (the stationary AR(1)
    /// is reversible) and flip the result back.
    fn conditional_head_draw(
        m: &Ar1Ssm,
        alpha_next: f64,
        ys_head: &[f64], // y_{s−1..s+K−1} in forward time order
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let rev: Vec<f64> = ys_head.iter().rev().copied().collect();
        let mut path = simulation_smoother(m, &rev, FilterInit::FromState(alpha_next), rng);
        path.reverse();
        path
    }

    #[test]
    fn inner_weight_with_backward_prior_proposal_is_observation_density() {
        let model = LgModel::new(LgProposal::Prior);
        let theta = LgTheta { mu: 0.2, sigma2: 0.6 };
        let v = log_inner_weight_backward(&model, &theta, 4, &0.3, &0.8, &0.1);
        assert_eq!(v, model.log_obs(&0.1, &0.3, Some(&0.8), &theta));
    }

    #[test]
    fn inner_weight_matches_direct_density_ratio() {
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: -0.4, sigma2: 1.1 };
        let (state, next, y) = (0.25, -0.6, 0.4);
        let v = log_inner_weight_backward(&model, &theta, 4, &state, &next, &y);
        let direct = model.log_backward_prior(&state, &next, &theta)
            + model.log_obs(&y, &state, Some(&next), &theta)
            - model.log_backward_proposal(4, &state, &next, &y, &theta);
        assert!((v - direct).abs() < 1e-10);
    }

    #[test]
    fn fully_adapted_backward_weights_constant_across_candidates() {
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: 0.0, sigma2: 0.9 };
        let next = 0.7;
        let y = -0.2;
        let mut r = rng(50);
        let mut vals = Vec::new();
        for _ in 0..30 {
            let cand = model.sample_backward_proposal(3, &next, &y, &theta, &mut r);
            vals.push(log_inner_weight_backward(&model, &theta, 3, &cand, &next, &y));
        }
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn smoother_weights_edge_cases_and_oracle() {
        let model = LgModel::new(LgProposal::Prior);
        let theta = LgTheta { mu: 0.1, sigma2: 0.5 };
        // single candidate
        let w = smoother_weights_backward(&model, &theta, &[1.0], &[0.4], &0.2).unwrap();
        assert_eq!(w, vec![1.0]);
        // constant backward prior (φ = 0 makes p(prev | next) free of next)
        let mut flat = LgModel::new(LgProposal::Prior);
        flat.phi = 0.0;
        let v = [0.3, 0.3, 0.4];
        let w = smoother_weights_backward(&flat, &theta, &v, &[0.5, -0.5, 1.5], &0.2).unwrap();
        for (a, b) in w.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        // product-and-normalize oracle
        let cands = [0.5, -0.5, 1.5];
        let sel = 0.2;
        let w = smoother_weights_backward(&model, &theta, &v, &cands, &sel).unwrap();
        let raw: Vec<f64> = cands
            .iter()
            .zip(&v)
            .map(|(c, &vi)| vi * model.log_backward_prior(&sel, c, &theta).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        for (a, b) in w.iter().zip(&raw) {
            assert!((a - b / total).abs() < 1e-12);
        }
    }

    #[test]
    fn m_equals_one_reduces_to_inverse_observation_density() {
        let model = LgModel::new(LgProposal::Prior);
        let theta = LgTheta { mu: 0.3, sigma2: 0.8 };
        let (ys, states) = model.simulate(&theta, 8, &mut rng(51));
        // window starts at s = 3: pinned α_{2..=4}, conditioning α_5
        let pinned = &states[1..4];
        let mut r = rng(52);
        let res = backward_block_move(
            &model, &theta, pinned, &states[4], &ys, 3, 1, true, &mut r,
        )
        .unwrap();
        assert_eq!(res.head, states[2..4].to_vec());
        assert_eq!(
            res.log_phat_old,
            model.log_obs(&ys[1], &states[1], Some(&states[2]), &theta)
        );
    }

    #[test]
    fn pinned_path_and_parent_bookkeeping() {
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: 0.1, sigma2: 0.9 };
        let (ys, states) = model.simulate(&theta, 10, &mut rng(53));
        let pinned = &states[2..6]; // times 3..=6, K = 3, next = α_7
        let mut r = rng(54);
        let trace = backward_block_move_traced(
            &model, &theta, pinned, &states[6], &ys, 4, 12, false, &mut r,
        )
        .unwrap();
        for (j, p) in pinned.iter().enumerate() {
            assert_eq!(trace.states[j][0], *p);
        }
        for j in 0..3 {
            assert_eq!(trace.parents[j][0], 0, "pinned parent at row {j}");
        }
        // Without the smoother the selected lineage follows parent links
        // upward from the selection at time s.
        for j in 1..3 {
            assert_eq!(trace.ksel[j + 1], trace.parents[j][trace.ksel[j]]);
        }
        for row in &trace.vprobs {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn head_never_contains_the_dropped_state() {
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: 0.0, sigma2: 1.0 };
        let (ys, states) = model.simulate(&theta, 9, &mut rng(55));
        for k in 1..=3usize {
            let pinned = &states[1..2 + k];
            let mut r = rng(56 + k as u64);
            let res = backward_block_move(
                &model,
                &theta,
                pinned,
                &states[2 + k],
                &ys,
                3,
                5,
                true,
                &mut r,
            )
            .unwrap();
            assert_eq!(res.head.len(), k);
        }
    }

    #[test]
    fn increment_ignores_observations_beyond_the_block() {
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: 0.2, sigma2: 0.7 };
        let (ys, states) = model.simulate(&theta, 9, &mut rng(57));
        let pinned = &states[1..5];
        let run = |data: &[f64]| {
            let mut r = rng(58);
            backward_block_move(&model, &theta, pinned, &states[5], data, 3, 6, true, &mut r)
                .unwrap()
        };
        let mut altered = ys.clone();
        for y in altered.iter_mut().skip(5) {
            *y += 100.0;
        }
        let a = run(&ys);
        let b = run(&altered);
        assert_eq!(a.log_phat_old, b.log_phat_old);
        assert_eq!(a.head, b.head);
    }

    #[test]
    fn inverse_phat_is_unbiased_for_the_inverse_conditional_likelihood() {
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: 0.4, sigma2: 0.8 };
        let m = model.ar1(&theta);
        let (ys, _) = model.simulate(&theta, 8, &mut rng(59));
        let s = 3usize;
        let k = 2usize;
        let alpha_next = 0.55; // fixed α_{s+K}
        // exact p(y_{s−1} | y_{s:s+K−1}, α_{s+K}) via the reversed filter
        let between: Vec<f64> = ys[s - 1..s - 1 + k].iter().rev().copied().collect();
        let exact =
            conditional_log_predictive(&m, FilterInit::FromState(alpha_next), &between, ys[s - 2]);

        let reps = 10_000usize;
        let mut vals = Vec::with_capacity(reps);
        let head_ys = &ys[s - 2..s - 1 + k]; // y_{s−1..s+K−1}
        for i in 0..reps {
            let mut r = RngStream::new(903).particle(i, 0, StreamPhase::Oracle);
            let pinned = conditional_head_draw(&m, alpha_next, head_ys, &mut r);
            let res = backward_block_move(
                &model, &theta, &pinned, &alpha_next, &ys, s, 6, true, &mut r,
            )
            .unwrap();
            vals.push((-res.log_phat_old).exp());
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        let target = (-exact).exp();
        assert!(
            (mean - target).abs() < 3.0 * se,
            "mean 1/p̂ {mean} vs exact {target} ± {se}"
        );
    }

    #[test]
    fn marginal_of_alpha_s_matches_kalman_smoother_ks() {
        // Tiny Prop-5 setup: window length 6, K = 2, M = 3; exact-posterior
        // initial particles; after the move the weighted CDF of α_s matches
        // the exact smoother marginal on the shortened window.
        let model = LgModel::new(LgProposal::FullyAdapted);
        let theta = LgTheta { mu: 0.3, sigma2: 0.6 };
        let m = model.ar1(&theta);
        let (ys, _) = model.simulate(&theta, 6, &mut rng(60));
        let s = 2usize;
        let k = 2usize;
        let n = 20_000usize;
        let mut xs = Vec::with_capacity(n);
        let mut logw = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = RngStream::new(904).particle(i, 0, StreamPhase::Oracle);
            // exact draw of the full path given y_{s−1:t} = y_{1:6}
            let path = simulation_smoother(&m, &ys, FilterInit::Stationary, &mut r);
            let pinned = &path[0..=k]; // α_{s−1..s+K−1} = α_{1..3}
            let res = backward_block_move(
                &model, &theta, pinned, &path[k + 1], &ys, s, 3, true, &mut r,
            )
            .unwrap();
            xs.push(res.head[0]);
            logw.push(-res.log_phat_old);
        }
        let (probs, _) = crate::weights::normalize(&logw).unwrap();
        // exact marginal of α_s given y_{s:6} = y_{2:6}
        let run = kalman_filter(&m, &ys[1..], FilterInit::Stationary);
        let (sm, sv) = kalman_smoother(&m, &run);
        use statrs::distribution::ContinuousCDF;
        let normal = statrs::distribution::Normal::new(sm[0], sv[0].sqrt()).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
        let mut acc = 0.0;
        let mut ks: f64 = 0.0;
        for &i in &order {
            let below = acc;
            acc += probs[i];
            let cdf = normal.cdf(xs[i]);
            ks = ks.max((cdf - below).abs()).max((cdf - acc).abs());
        }
        assert!(ks < 0.025, "KS distance {ks}");
    }

    #[test]
    fn dead_move_returns_zero_weight_contract() {
        let model = LgModel::new(LgProposal::Prior);
        let theta = LgTheta { mu: 0.0, sigma2: 1e-6 };
        let pinned = [0.0, 0.0, 0.0];
        // y_{s−1} is impossible under every candidate: all v_{s−1} vanish.
        let data = [0.0, 1e200, 0.0, 0.0, 0.0];
        let mut r = rng(61);
        let res =
            backward_block_move(&model, &theta, &pinned, &0.0, &data, 3, 4, true, &mut r).unwrap();
        assert_eq!(res.log_phat_old, f64::NEG_INFINITY);
        assert_eq!(res.head.len(), 2);
    }
}
