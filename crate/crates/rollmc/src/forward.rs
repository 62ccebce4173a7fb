//! Forward block sampling: one conditional-SMC move over the newest `K+1`
//! states of a single outer particle.
//!
//! Given the current path and the conditioning state `α_{t−K−1}`, the move
//! pins the current states at inner index 0, grows `M−1` fresh paths through
//! times `t−K..t−1` with ancestor resampling, proposes all `M` states at the
//! new time `t` (the pinned lineage's tip spawns inner particle 0), selects
//! one lineage, and optionally re-selects the whole lineage with the particle
//! simulation smoother. The by-product
//!
//! ```text
//! p̂(y_t | y_{s−1:t−1}, α_{t−K−1}, θ) = (1/M) Σ_m v_t(α^{a_m}_{t−1}, α^m_t)
//! ```
//!
//! is the particle's weight increment for the add step and an unbiased
//! estimator of the exact conditional likelihood.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Ssm;
use crate::resample::CategoricalSampler;
use crate::weights::{log_sum_exp, normalize};

/// Outcome of one forward block move.
#[derive(Debug, Clone)]
pub struct ForwardBlockResult<S> {
    /// States for times `t−K..=t`. When the move aborts (`log_phat = −inf`)
    /// this is the pinned path padded with a copy of its tip so the caller's
    /// trajectory stays well-formed; the particle's weight is zero anyway.
    pub tail: Vec<S>,
    /// `log p̂(y_t | y_{s−1:t−1}, α_{t−K−1}, θ)`; `−inf` when every inner
    /// weight at some time vanished.
    pub log_phat: f64,
}

/// `log v_j`: the inner importance weight of one candidate,
/// `log f_θ(α_j | α_{j−1}, y_{j−1}) + log g_θ(y_j | α_j) − log q_j(α_j | α_{j−1}, y_j)`,
/// with `μ_θ` replacing `f_θ` when there is no previous state.
///
/// Grouped as `(f − q) + g` so that prior proposals cancel exactly.
pub fn log_inner_weight_forward<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    j: usize,
    prev: Option<&M::State>,
    state: &M::State,
    y_prev: Option<&M::Obs>,
    y: &M::Obs,
) -> f64 {
    let trans = match prev {
        Some(p) => model.log_trans(state, p, y_prev, theta),
        None => model.log_init(state, theta),
    };
    let q = model.log_forward_proposal(j, state, prev, y, theta);
    (trans - q) + model.log_obs(y, state, None, theta)
}

/// Particle-simulation-smoother weights at time `j`:
/// `V̄^m ∝ V^m · f_θ(α^{k*}_{j+1} | α^m_j, y_j)`, normalized.
pub fn smoother_weights_forward<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    v_probs: &[f64],
    candidates: &[M::State],
    selected_next: &M::State,
    y: &M::Obs,
) -> Result<Vec<f64>> {
    debug_assert_eq!(v_probs.len(), candidates.len());
    let logf: Vec<f64> = candidates
        .iter()
        .map(|c| model.log_trans(selected_next, c, Some(y), theta))
        .collect();
    let max = logf
        .iter()
        .zip(v_probs)
        .filter(|(lf, &v)| lf.is_finite() && v > 0.0)
        .map(|(lf, _)| *lf)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let mut w: Vec<f64> = logf
        .iter()
        .zip(v_probs)
        .map(|(&lf, &v)| if lf.is_finite() && v > 0.0 { v * (lf - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct ForwardTrace<S> {
    /// `states[j][m]`: candidate at block offset `j` (time `bstart + j`).
    pub states: Vec<Vec<S>>,
    /// Normalized inner weights per row.
    pub vprobs: Vec<Vec<f64>>,
    /// `parents[j][m]` for `j ≥ 1`: ancestor index of `states[j][m]` in row `j−1`.
    pub parents: Vec<Vec<usize>>,
    /// Selected lineage after (optionally) the smoother.
    pub ksel: Vec<usize>,
}

enum ForwardOutcome<S> {
    Done(ForwardTrace<S>, f64),
    /// All inner weights vanished at some time; particle gets zero weight.
    Dead,
}

fn run_forward<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    pinned: &[M::State],
    prev: Option<&M::State>,
    data: &[M::Obs],
    bstart: usize,
    m_inner: usize,
    use_smoother: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardOutcome<M::State>> {
    let kk = pinned.len();
    assert!(kk >= 1, "block must regenerate at least one existing state");
    assert!(m_inner >= 1);
    let t_new = bstart + kk;
    assert!(data.len() >= t_new, "window must contain observations through the new time");
    match prev {
        Some(_) => assert!(bstart >= 2, "a conditioning state needs the observation before the block"),
        None => assert!(bstart == 1, "only a block starting at time 1 may lack a predecessor"),
    }

    let y_at = |time: usize| &data[time - 1];

    let mut states: Vec<Vec<M::State>> = Vec::with_capacity(kk + 1);
    let mut vprobs: Vec<Vec<f64>> = Vec::with_capacity(kk + 1);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new()];
    let mut log_v_last: Vec<f64> = Vec::new();

    for j in 0..=kk {
        let time = bstart + j;
        let y = y_at(time);
        let y_prev = if j == 0 {
            if prev.is_some() { Some(y_at(bstart - 1)) } else { None }
        } else {
            Some(y_at(time - 1))
        };
        let mut row: Vec<M::State> = Vec::with_capacity(m_inner);
        let mut row_parents: Vec<usize> = Vec::with_capacity(m_inner);
        let mut logv: Vec<f64> = Vec::with_capacity(m_inner);
        let sampler = if j > 0 { Some(CategoricalSampler::new(&vprobs[j - 1])) } else { None };
        for m in 0..m_inner {
            let (parent_idx, state) = if j == 0 {
                let st = if m == 0 {
                    pinned[0].clone()
                } else {
                    model.sample_forward_proposal(time, prev, y, theta, rng)
                };
                (0usize, st)
            } else if j < kk {
                if m == 0 {
                    (0, pinned[j].clone())
                } else {
                    let a = sampler.as_ref().unwrap().sample(rng);
                    let st =
                        model.sample_forward_proposal(time, Some(&states[j - 1][a]), y, theta, rng);
                    (a, st)
                }
            } else {
                // new time t: every inner particle proposes; index 0 descends
                // from the pinned tip
                let a = if m == 0 { 0 } else { sampler.as_ref().unwrap().sample(rng) };
                let st =
                    model.sample_forward_proposal(time, Some(&states[j - 1][a]), y, theta, rng);
                (a, st)
            };
            if !model.state_is_valid(&state) {
                return Err(Error::DegenerateProposal);
            }
            let parent_state = if j == 0 { prev } else { Some(&states[j - 1][parent_idx]) };
            logv.push(log_inner_weight_forward(
                model,
                theta,
                time,
                parent_state,
                &state,
                y_prev,
                y,
            ));
            row.push(state);
            row_parents.push(parent_idx);
        }
        if j > 0 {
            parents.push(row_parents);
        }
        states.push(row);
        match normalize(&logv) {
            Ok((p, _)) => vprobs.push(p),
            Err(Error::AllWeightsZero) => return Ok(ForwardOutcome::Dead),
            Err(e) => return Err(e),
        }
        if j == kk {
            log_v_last = logv;
        }
    }

    let log_phat = log_sum_exp(&log_v_last) - (m_inner as f64).ln();

    let mut ksel = vec![0usize; kk + 1];
    ksel[kk] = CategoricalSampler::new(&vprobs[kk]).sample(rng);
    if use_smoother {
        for j in (0..kk).rev() {
            let w = smoother_weights_forward(
                model,
                theta,
                &vprobs[j],
                &states[j],
                &states[j + 1][ksel[j + 1]],
                y_at(bstart + j),
            )?;
            ksel[j] = CategoricalSampler::new(&w).sample(rng);
        }
    } else {
        for j in (0..kk).rev() {
            ksel[j] = parents[j + 1][ksel[j + 1]];
        }
    }

    Ok(ForwardOutcome::Done(ForwardTrace { states, vprobs, parents, ksel }, log_phat))
}

/// One forward block move. `pinned` holds the current states for times
/// `bstart..=t−1` (so `K = pinned.len()` and `t = bstart + K`), `prev` the
/// conditioning state `α_{bstart−1}` (`None` only for an initialization block
/// starting at time 1), and `data` the full observation record with `data[j]`
/// the observation at time `j+1`.
#[allow(clippy::too_many_arguments)]
pub fn forward_block_move<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    pinned: &[M::State],
    prev: Option<&M::State>,
    data: &[M::Obs],
    bstart: usize,
    m_inner: usize,
    use_smoother: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardBlockResult<M::State>> {
    match run_forward(model, theta, pinned, prev, data, bstart, m_inner, use_smoother, rng)? {
        ForwardOutcome::Done(trace, log_phat) => {
            let tail = trace
                .ksel
                .iter()
                .enumerate()
                .map(|(j, &m)| trace.states[j][m].clone())
                .collect();
            Ok(ForwardBlockResult { tail, log_phat })
        }
        ForwardOutcome::Dead => {
            let mut tail: Vec<M::State> = pinned.to_vec();
            tail.push(pinned[pinned.len() - 1].clone());
            Ok(ForwardBlockResult { tail, log_phat: f64::NEG_INFINITY })
        }
    }
}

#[cfg(test)]
pub(crate) fn forward_block_move_traced<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    pinned: &[M::State],
    prev: Option<&M::State>,
    data: &[M::Obs],
    bstart: usize,
    m_inner: usize,
    use_smoother: bool,
    rng: &mut ChaCha8Rng,
) -> Option<ForwardTrace<M::State>> {
    match run_forward(model, theta, pinned, prev, data, bstart, m_inner, use_smoother, rng).unwrap()
    {
        ForwardOutcome::Done(trace, _) => Some(trace),
        ForwardOutcome::Dead => None,
    }
}
