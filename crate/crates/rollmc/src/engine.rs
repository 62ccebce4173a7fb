//! Orchestration of the rolling run: initialization, per-roll add/remove
//! steps, ESS-triggered resample-move, diagnostics, and the recursive
//! marginal-likelihood estimate.
//!
//! The particle system holds `N` outer particles `(θ^n, α^n_{s:t})` with log
//! weights. One roll of the window performs
//!
//! 1. **add** `y_{t+1}`: per particle either a forward block move (block
//!    sampler) or a single proposal (simple sampler); the weight picks up the
//!    increment, the marginal-likelihood accumulator picks up
//!    `log Σ_n W^n p̂^n` with pre-update weights;
//! 2. conditional resample-move targeting the grown window;
//! 3. **remove** `y_s`: per particle either a backward block move or a plain
//!    `1/g` reweighting; the oldest state is dropped and the accumulator
//!    subtracts the remove increment;
//! 4. conditional resample-move targeting the shifted window.
//!
//! ESS ratios are recorded before each resample decision: `R1 = ESS(after
//! add) / ESS(before)`, `R2 = ESS(after remove) / ESS(entering the remove
//! step)`. After a resample-move the ESS is exactly `N`.
//!
//! Everything is deterministic for a fixed seed regardless of how many
//! threads execute the parallel sections: every particle owns a counter-based
//! RNG stream and reductions run serially in index order.

use std::time::Instant;

use rayon::prelude::*;

use crate::backward::backward_block_move;
use crate::error::{Error, Result};
use crate::forward::{forward_block_move, log_inner_weight_forward};
use crate::model::Ssm;
use crate::resample::{multinomial_resample, systematic_resample};
use crate::rng::{RngStream, StreamPhase};
use crate::weights::{ess, log_sum_exp, normalize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplingScheme {
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Double block sampler over a sliding window.
    Rolling,
    /// Double block machinery, but the window only ever grows (no removal).
    Sequential,
    /// Single-state proposals and `1/g` removal over a sliding window.
    Simple,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub n_particles: usize,
    pub n_inner: usize,
    pub block_len: usize,
    /// Observations per window (the paper's L+1).
    pub window: usize,
    /// Resample when ESS < c·N.
    pub ess_threshold: f64,
    /// MCMC sweeps per resample-move.
    pub mcmc_sweeps: usize,
    pub use_smoother: bool,
    pub resampling: ResamplingScheme,
    pub seed: u64,
    pub mode: RunMode,
    /// Skip θ updates while the window is shorter than this (default: dim θ).
    pub theta_update_min_window: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            n_inner: 100,
            block_len: 2,
            window: 100,
            ess_threshold: 0.5,
            mcmc_sweeps: 10,
            use_smoother: true,
            resampling: ResamplingScheme::Multinomial,
            seed: 1,
            mode: RunMode::Rolling,
            theta_update_min_window: None,
        }
    }
}

impl EngineConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_particles == 0 {
            return bad("n_particles must be positive");
        }
        if self.n_inner == 0 {
            return bad("n_inner must be positive");
        }
        if self.block_len == 0 {
            return bad("block_len must be positive");
        }
        if self.window < 2 {
            return bad("window must cover at least two observations");
        }
        if !(self.ess_threshold >= 0.0 && self.ess_threshold <= 1.0) {
            return bad("ess_threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Diagnostics for one step (one initialization step or one roll).
#[derive(Debug, Clone)]
pub struct StepDiag {
    /// Absolute end time of the window after the step.
    pub t: usize,
    pub ess_prev: f64,
    pub ess_after_add: f64,
    pub resampled_add: bool,
    pub ess_after_remove: f64,
    pub resampled_remove: bool,
    pub r1: f64,
    pub r2: f64,
    pub log_incr_add: f64,
    /// Remove increment used by the running estimate: the weight-sum
    /// telescoping `−log Σ W/p̂`, whose inverse is an unbiased estimate of
    /// the inverse conditional likelihood.
    pub log_incr_remove: f64,
    /// The direct weighted average `log Σ W·p̂` of the remove-step
    /// conditional-likelihood estimates; recorded for comparison, not used by
    /// the recursion (it drifts: only the inverse form is unbiased).
    pub log_incr_remove_direct: f64,
    /// Running log marginal-likelihood estimate of the current window.
    pub log_ml: f64,
    pub wall_ms: f64,
}

/// Posterior summary of one parameter component.
#[derive(Debug, Clone)]
pub struct ParamSummary {
    pub name: &'static str,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

/// One output row per completed step.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub t: usize,
    pub params: Vec<ParamSummary>,
    pub log_ml: f64,
    pub r1: f64,
    pub r2: f64,
    pub ess: f64,
    pub resampled_add: bool,
    pub resampled_remove: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub diags: Vec<StepDiag>,
    pub resample_events_init: usize,
    pub resample_events_rolling: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Init,
    Rolling,
}

pub struct Engine<'a, M: Ssm> {
    model: &'a M,
    cfg: EngineConfig,
    data: Vec<M::Obs>,
    theta: Vec<M::Theta>,
    traj: Vec<Vec<M::State>>,
    logw: Vec<f64>,
    /// Current window [s, t], 1-based absolute times; valid once initialized.
    s: usize,
    t: usize,
    log_ml: f64,
    current_ess: f64,
    resample_events_init: usize,
    resample_events_rolling: usize,
    last_remove_direct: f64,
}

impl<'a, M: Ssm> Engine<'a, M> {
    pub fn new(model: &'a M, cfg: EngineConfig, data: Vec<M::Obs>) -> Result<Self> {
        cfg.validate()?;
        if data.len() < cfg.window {
            return Err(Error::InvalidConfig(format!(
                "data has {} observations but the window needs {}",
                data.len(),
                cfg.window
            )));
        }
        Ok(Self {
            model,
            cfg,
            data,
            theta: Vec::new(),
            traj: Vec::new(),
            logw: Vec::new(),
            s: 1,
            t: 0,
            log_ml: 0.0,
            current_ess: f64::NAN,
            resample_events_init: 0,
            resample_events_rolling: 0,
            last_remove_direct: f64::NAN,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn window_bounds(&self) -> (usize, usize) {
        (self.s, self.t)
    }

    pub fn log_ml(&self) -> f64 {
        self.log_ml
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    pub fn particles(&self) -> (&[M::Theta], &[Vec<M::State>], &[f64]) {
        (&self.theta, &self.traj, &self.logw)
    }

    /// Weighted cloud of one θ component: (values, normalized weights).
    pub fn theta_cloud(&self, component: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (probs, _) = normalize(&self.logw)?;
        let vals = self
            .theta
            .iter()
            .map(|th| self.model.theta_components(th)[component])
            .collect();
        Ok((vals, probs))
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.cfg.seed)
    }

    fn n(&self) -> usize {
        self.cfg.n_particles
    }

    fn theta_min_window(&self) -> usize {
        self.cfg.theta_update_min_window.unwrap_or_else(|| self.model.theta_dim())
    }

    fn ess_now(&self) -> Result<f64> {
        let (probs, _) = normalize(&self.logw)?;
        Ok(ess(&probs))
    }

    /// Resample all particles to uniform weights and refresh them with R
    /// sweeps of the model's MCMC kernel targeting the current window.
    fn resample_move(
        &mut self,
        step: usize,
        resample_phase: StreamPhase,
        move_phase: StreamPhase,
        stage: Stage,
    ) -> Result<()> {
        let (probs, _) = normalize(&self.logw)?;
        let mut rng = self.stream().global(step, resample_phase);
        let ancestors = match self.cfg.resampling {
            ResamplingScheme::Multinomial => multinomial_resample(&probs, self.n(), &mut rng),
            ResamplingScheme::Systematic => systematic_resample(&probs, self.n(), &mut rng),
        };
        self.theta = ancestors.iter().map(|&a| self.theta[a].clone()).collect();
        self.traj = ancestors.iter().map(|&a| self.traj[a].clone()).collect();
        self.logw = vec![0.0; self.n()];

        let window_len = self.t - self.s + 1;
        let update_theta = window_len >= self.theta_min_window();
        let sweeps = self.cfg.mcmc_sweeps;
        let model = self.model;
        let stream = self.stream();
        let ys = &self.data[self.s - 1..self.t];
        self.theta
            .par_iter_mut()
            .zip(self.traj.par_iter_mut())
            .enumerate()
            .for_each(|(i, (theta, traj))| {
                let mut rng = stream.particle(i, step, move_phase);
                for _ in 0..sweeps {
                    model.mcmc_kernel(theta, traj, ys, update_theta, &mut rng);
                }
            });
        match stage {
            Stage::Init => self.resample_events_init += 1,
            Stage::Rolling => self.resample_events_rolling += 1,
        }
        self.current_ess = self.n() as f64;
        Ok(())
    }

    /// First initialization step: θ from the prior, M importance draws of α_1,
    /// selection, and `log p̂(y_1 | θ^n)` as the initial weight.
    fn init_first(&mut self, n_inner: usize) -> Result<StepDiag> {
        let clock = Instant::now();
        let n = self.n();
        let model = self.model;
        let stream = self.stream();
        let y1 = &self.data[0];
        let lse_before = (n as f64).ln(); // uniform zero log weights

        let per: Vec<(M::Theta, M::State, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut trng = stream.particle(i, 0, StreamPhase::ThetaInit);
                let theta = model.sample_prior_theta(&mut trng);
                let mut rng = stream.particle(i, 1, StreamPhase::Forward);
                let mut states = Vec::with_capacity(n_inner);
                let mut logv = Vec::with_capacity(n_inner);
                for _ in 0..n_inner {
                    let st = model.sample_forward_proposal(1, None, y1, &theta, &mut rng);
                    if !model.state_is_valid(&st) {
                        return Err(Error::DegenerateProposal);
                    }
                    logv.push(log_inner_weight_forward(model, &theta, 1, None, &st, None, y1));
                    states.push(st);
                }
                let (selected, logw) = match normalize(&logv) {
                    Ok((probs, _)) => {
                        let k = crate::resample::CategoricalSampler::new(&probs).sample(&mut rng);
                        (states.swap_remove(k), log_sum_exp(&logv) - (n_inner as f64).ln())
                    }
                    Err(Error::AllWeightsZero) => (states.swap_remove(0), f64::NEG_INFINITY),
                    Err(e) => return Err(e),
                };
                Ok((theta, selected, logw))
            })
            .collect::<Result<Vec<_>>>()?;

        self.theta = Vec::with_capacity(n);
        self.traj = Vec::with_capacity(n);
        self.logw = Vec::with_capacity(n);
        for (theta, state, lw) in per {
            self.theta.push(theta);
            self.traj.push(vec![state]);
            self.logw.push(lw);
        }
        self.s = 1;
        self.t = 1;
        let incr = log_sum_exp(&self.logw) - lse_before;
        if incr == f64::NEG_INFINITY {
            return Err(Error::AllWeightsZero);
        }
        self.log_ml = incr;
        self.current_ess = self.ess_now()?;
        Ok(StepDiag {
            t: 1,
            ess_prev: n as f64,
            ess_after_add: self.current_ess,
            resampled_add: false,
            ess_after_remove: f64::NAN,
            resampled_remove: false,
            r1: self.current_ess / n as f64,
            r2: f64::NAN,
            log_incr_add: incr,
            log_incr_remove: f64::NAN,
            log_incr_remove_direct: f64::NAN,
            log_ml: self.log_ml,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Add observation `t+1` by forward block moves (clamping K to the data
    /// available in the window). Returns the ML increment and the ESS after
    /// the update. `forced_resample` additionally triggers the resample-move
    /// unconditionally (initialization in the clamped regime).
    fn add_step_block(&mut self, forced_resample: bool, stage: Stage) -> Result<(f64, f64, bool)> {
        let t_new = self.t + 1;
        let len = self.t - self.s + 1;
        // Clamp the block to the states actually held. A block spanning the
        // whole trajectory is only allowed during initialization (s = 1),
        // where the first state is proposed from the initial law instead of a
        // conditioning state.
        let mut k_eff = self.cfg.block_len.min(len);
        let mut from_initial = false;
        if k_eff == len {
            if self.s == 1 {
                from_initial = true;
            } else {
                k_eff = len - 1;
            }
        }
        let bstart = t_new - k_eff;

        let model = self.model;
        let stream = self.stream();
        let data = &self.data;
        let m_inner = self.cfg.n_inner;
        let use_smoother = self.cfg.use_smoother;
        let s = self.s;
        let theta = &self.theta;
        let results: Vec<_> = self
            .traj
            .par_iter()
            .enumerate()
            .map(|(i, traj)| {
                let mut rng = stream.particle(i, t_new, StreamPhase::Forward);
                let pinned = &traj[traj.len() - k_eff..];
                let prev = if from_initial { None } else { Some(&traj[bstart - 1 - s]) };
                forward_block_move(
                    model,
                    &theta[i],
                    pinned,
                    prev,
                    data,
                    bstart,
                    m_inner,
                    use_smoother,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let lse_before = log_sum_exp(&self.logw);
        for (i, res) in results.into_iter().enumerate() {
            let traj = &mut self.traj[i];
            let keep = traj.len() - k_eff;
            traj.truncate(keep);
            traj.extend(res.tail);
            self.logw[i] += res.log_phat;
        }
        let lse_after = log_sum_exp(&self.logw);
        if lse_after == f64::NEG_INFINITY {
            return Err(Error::AllWeightsZero);
        }
        let incr = lse_after - lse_before;
        self.t = t_new;
        self.log_ml += incr;

        let ess_add = self.ess_now()?;
        let trigger = ess_add < self.cfg.ess_threshold * self.n() as f64;
        let resampled = forced_resample || trigger;
        if resampled {
            self.resample_move(t_new, StreamPhase::ResampleAdd, StreamPhase::MoveAdd, stage)?;
        } else {
            self.current_ess = ess_add;
        }
        Ok((incr, ess_add, resampled))
    }

    /// Add observation `t+1` with a single proposal per particle (simple
    /// sampler Step 1).
    fn add_step_simple(&mut self, stage: Stage) -> Result<(f64, f64, bool)> {
        let t_new = self.t + 1;
        let model = self.model;
        let stream = self.stream();
        let y = &self.data[t_new - 1];
        let y_prev = &self.data[self.t - 1];
        let theta = &self.theta;
        let results: Vec<_> = self
            .traj
            .par_iter()
            .enumerate()
            .map(|(i, traj)| {
                let mut rng = stream.particle(i, t_new, StreamPhase::Forward);
                let prev = traj.last().unwrap();
                let st = model.sample_forward_proposal(t_new, Some(prev), y, &theta[i], &mut rng);
                if !model.state_is_valid(&st) {
                    return Err(Error::DegenerateProposal);
                }
                let v = log_inner_weight_forward(
                    model,
                    &theta[i],
                    t_new,
                    Some(prev),
                    &st,
                    Some(y_prev),
                    y,
                );
                Ok((st, v))
            })
            .collect::<Result<Vec<_>>>()?;

        let lse_before = log_sum_exp(&self.logw);
        for (i, (st, v)) in results.into_iter().enumerate() {
            self.traj[i].push(st);
            self.logw[i] += v;
        }
        let lse_after = log_sum_exp(&self.logw);
        if lse_after == f64::NEG_INFINITY {
            return Err(Error::AllWeightsZero);
        }
        let incr = lse_after - lse_before;
        self.t = t_new;
        self.log_ml += incr;

        let ess_add = self.ess_now()?;
        let resampled = ess_add < self.cfg.ess_threshold * self.n() as f64;
        if resampled {
            self.resample_move(t_new, StreamPhase::ResampleAdd, StreamPhase::MoveAdd, stage)?;
        } else {
            self.current_ess = ess_add;
        }
        Ok((incr, ess_add, resampled))
    }

    /// Remove the oldest observation by backward block moves.
    fn remove_step_block(&mut self, stage: Stage) -> Result<(f64, f64, bool)> {
        let s_new = self.s + 1; // the paper's s: window becomes [s_new, t]
        let k_eff = self.cfg.block_len.min(self.t - s_new).max(1);
        let step = self.t;
        let model = self.model;
        let stream = self.stream();
        let data = &self.data;
        let m_inner = self.cfg.n_inner;
        let use_smoother = self.cfg.use_smoother;
        let theta = &self.theta;
        let results: Vec<_> = self
            .traj
            .par_iter()
            .enumerate()
            .map(|(i, traj)| {
                let mut rng = stream.particle(i, step, StreamPhase::Backward);
                let pinned = &traj[..k_eff + 1];
                let next = &traj[k_eff + 1];
                backward_block_move(
                    model,
                    &theta[i],
                    pinned,
                    next,
                    data,
                    s_new,
                    m_inner,
                    use_smoother,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let lse_pre = log_sum_exp(&self.logw);
        let mixed: Vec<f64> = self
            .logw
            .iter()
            .zip(&results)
            .map(|(&lw, res)| lw + res.log_phat_old)
            .collect();
        let incr = log_sum_exp(&mixed) - lse_pre;

        for (i, res) in results.into_iter().enumerate() {
            let traj = &mut self.traj[i];
            let mut new_traj = res.head;
            new_traj.extend_from_slice(&traj[k_eff + 1..]);
            *traj = new_traj;
            self.logw[i] = if res.log_phat_old == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                self.logw[i] - res.log_phat_old
            };
        }
        let lse_post = log_sum_exp(&self.logw);
        if lse_post == f64::NEG_INFINITY {
            return Err(Error::AllWeightsZero);
        }
        self.last_remove_direct = incr;
        let incr = lse_pre - lse_post;
        self.s = s_new;
        self.log_ml -= incr;

        let ess_rem = self.ess_now()?;
        let resampled = ess_rem < self.cfg.ess_threshold * self.n() as f64;
        if resampled {
            self.resample_move(self.t, StreamPhase::ResampleRemove, StreamPhase::MoveRemove, stage)?;
        } else {
            self.current_ess = ess_rem;
        }
        Ok((incr, ess_rem, resampled))
    }

    /// Remove the oldest observation by plain reweighting (simple sampler
    /// Step 2): divide by `g(y_s | α_s, α_{s+1})` and drop `α_s`.
    fn remove_step_simple(&mut self, stage: Stage) -> Result<(f64, f64, bool)> {
        let model = self.model;
        let y_old = &self.data[self.s - 1];
        let increments: Vec<f64> = self
            .traj
            .iter()
            .zip(&self.theta)
            .map(|(traj, theta)| model.log_obs(y_old, &traj[0], Some(&traj[1]), theta))
            .collect();

        let lse_pre = log_sum_exp(&self.logw);
        let mixed: Vec<f64> =
            self.logw.iter().zip(&increments).map(|(&lw, &g)| lw + g).collect();
        let incr = log_sum_exp(&mixed) - lse_pre;

        for (i, g) in increments.into_iter().enumerate() {
            self.traj[i].remove(0);
            self.logw[i] =
                if g == f64::NEG_INFINITY { f64::NEG_INFINITY } else { self.logw[i] - g };
        }
        let lse_post = log_sum_exp(&self.logw);
        if lse_post == f64::NEG_INFINITY {
            return Err(Error::AllWeightsZero);
        }
        self.last_remove_direct = incr;
        let incr = lse_pre - lse_post;
        self.s += 1;
        self.log_ml -= incr;

        let ess_rem = self.ess_now()?;
        let resampled = ess_rem < self.cfg.ess_threshold * self.n() as f64;
        if resampled {
            self.resample_move(self.t, StreamPhase::ResampleRemove, StreamPhase::MoveRemove, stage)?;
        } else {
            self.current_ess = ess_rem;
        }
        Ok((incr, ess_rem, resampled))
    }

    /// One full roll (add `y_{t+1}`, remove `y_s`) with the configured
    /// sampler.
    pub fn roll_once(&mut self) -> Result<StepDiag> {
        assert!(self.t >= self.s, "engine not initialized");
        assert!(self.t < self.data.len(), "no observation left to add");
        let clock = Instant::now();
        let ess_prev = self.current_ess;
        let simple = self.cfg.mode == RunMode::Simple;
        let (incr_add, ess_add, resampled_add) = if simple {
            self.add_step_simple(Stage::Rolling)?
        } else {
            self.add_step_block(false, Stage::Rolling)?
        };
        let r1 = ess_add / ess_prev;
        let ess_mid = self.current_ess;
        let (incr_rem, ess_rem, resampled_rem) = if simple {
            self.remove_step_simple(Stage::Rolling)?
        } else {
            self.remove_step_block(Stage::Rolling)?
        };
        let r2 = ess_rem / ess_mid;
        Ok(StepDiag {
            t: self.t,
            ess_prev,
            ess_after_add: ess_add,
            resampled_add,
            ess_after_remove: ess_rem,
            resampled_remove: resampled_rem,
            r1,
            r2,
            log_incr_add: incr_add,
            log_incr_remove: incr_rem,
            log_incr_remove_direct: self.last_remove_direct,
            log_ml: self.log_ml,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// One initialization step `j = t+1` (sequential growth of the window).
    pub fn grow_once(&mut self) -> Result<StepDiag> {
        assert!(self.t >= 1, "first step must be init_first");
        let clock = Instant::now();
        let j = self.t + 1;
        let ess_prev = self.current_ess;
        let simple = self.cfg.mode == RunMode::Simple;
        let (incr_add, ess_add, resampled_add) = if simple {
            self.add_step_simple(Stage::Init)?
        } else {
            // Forced full resample while the block is clamped by short
            // history (j ≤ K).
            let forced = j <= self.cfg.block_len;
            self.add_step_block(forced, Stage::Init)?
        };
        Ok(StepDiag {
            t: self.t,
            ess_prev,
            ess_after_add: ess_add,
            resampled_add,
            ess_after_remove: f64::NAN,
            resampled_remove: false,
            r1: ess_add / ess_prev,
            r2: f64::NAN,
            log_incr_add: incr_add,
            log_incr_remove: f64::NAN,
            log_incr_remove_direct: f64::NAN,
            log_ml: self.log_ml,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Initialize the particle system over the first `window` observations
    /// (or however many `upto` requests), collecting one diagnostics row per
    /// step.
    pub fn initialize(&mut self, upto: usize) -> Result<Vec<StepDiag>> {
        let simple = self.cfg.mode == RunMode::Simple;
        let n_inner_first = if simple { 1 } else { self.cfg.n_inner };
        let mut diags = vec![self.init_first(n_inner_first)?];
        while self.t < upto {
            diags.push(self.grow_once()?);
        }
        Ok(diags)
    }

    fn summarize(&self) -> Result<Vec<ParamSummary>> {
        let (probs, _) = normalize(&self.logw)?;
        let names = self.model.theta_names();
        let comps: Vec<Vec<f64>> =
            self.theta.iter().map(|th| self.model.theta_components(th)).collect();
        let mut out = Vec::with_capacity(names.len());
        for (c, name) in names.iter().enumerate() {
            let vals: Vec<f64> = comps.iter().map(|v| v[c]).collect();
            let mean: f64 = vals.iter().zip(&probs).map(|(x, p)| x * p).sum();
            out.push(ParamSummary {
                name,
                mean,
                q025: weighted_quantile(&vals, &probs, 0.025),
                q975: weighted_quantile(&vals, &probs, 0.975),
            });
        }
        Ok(out)
    }

    /// Posterior summaries and diagnostics for one completed step.
    pub fn result_row(&self, diag: &StepDiag) -> Result<ResultRow> {
        Ok(ResultRow {
            t: diag.t,
            params: self.summarize()?,
            log_ml: diag.log_ml,
            r1: diag.r1,
            r2: diag.r2,
            ess: self.current_ess,
            resampled_add: diag.resampled_add,
            resampled_remove: diag.resampled_remove,
            wall_ms: diag.wall_ms,
        })
    }

    /// Run the configured mode over the whole data record.
    pub fn run(&mut self) -> Result<RunOutput> {
        let total = self.data.len();
        let init_upto = match self.cfg.mode {
            RunMode::Sequential => total,
            _ => self.cfg.window,
        };
        let mut rows = Vec::new();
        let mut diags = Vec::new();
        for d in self.initialize(init_upto)? {
            rows.push(self.result_row(&d)?);
            diags.push(d);
        }
        if self.cfg.mode != RunMode::Sequential {
            while self.t < total {
                let d = self.roll_once()?;
                rows.push(self.result_row(&d)?);
                diags.push(d);
            }
        }
        Ok(RunOutput {
            rows,
            diags,
            resample_events_init: self.resample_events_init,
            resample_events_rolling: self.resample_events_rolling,
        })
    }
}

/// Quantile of a weighted sample: smallest value whose cumulative weight
/// reaches `q`.
pub fn weighted_quantile(values: &[f64], probs: &[f64], q: f64) -> f64 {
    debug_assert_eq!(values.len(), probs.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut acc = 0.0;
    for &i in &order {
        acc += probs[i];
        if acc >= q {
            return values[i];
        }
    }
    values[order[order.len() - 1]]
}
