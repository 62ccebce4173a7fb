//! Rolling-window Bayesian estimation of state space models with particle MCMC.
//!
//! The target of inference is the posterior `π(θ, α_{s:t} | y_{s:t})` of static
//! parameters θ and latent states α over a fixed-length window of observations
//! that slides one step at a time: each roll adds the newest observation `y_t`
//! and removes the oldest one `y_{s-1}`. A population of `N` weighted outer
//! particles `(θ^n, α^n_{s:t}, W^n)` tracks the posterior; ESS-triggered
//! resample-move steps with a model-supplied MCMC kernel keep it diversified.
//!
//! Two weight-update strategies are implemented:
//!
//! * the *simple* sampler, which proposes the single new state and reweights by
//!   `f·g/q` when adding and by `1/g` when removing — cheap but prone to severe
//!   weight degeneracy on removal;
//! * the *double block* sampler, which regenerates the newest `K+1` states by a
//!   forward conditional-SMC pass (with `M` inner paths and a particle
//!   simulation smoother) and the oldest `K+1` states by a time-reversed
//!   backward pass, reweighting by the inner estimates
//!   `p̂(y_t | y_{s-1:t-1}, α_{t-K-1}, θ)` and `1/p̂(y_{s-1} | y_{s:t}, α_{s+K}, θ)`.
//!
//! A by-product of either sampler is a recursive estimate of the per-window
//! marginal likelihood `p(y_{s:t})`.
//!
//! Two concrete models ship with the crate: a univariate linear Gaussian model
//! with a conjugate `(μ, σ²)` prior and exact Kalman/conjugate oracles used for
//! verification, and a realized stochastic volatility model with leverage.

pub mod backward;
pub mod engine;
pub mod error;
pub mod forward;
pub mod gauss;
pub mod kalman;
pub mod model;
pub mod models;
pub mod resample;
pub mod rng;
pub mod weights;

pub use engine::{
    Engine, EngineConfig, ParamSummary, ResamplingScheme, ResultRow, RunMode, RunOutput, StepDiag,
};
pub use error::Error;
pub use model::Ssm;
pub use rng::{RngStream, StreamPhase};
