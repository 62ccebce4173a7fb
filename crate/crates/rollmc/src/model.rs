//! The model abstraction every sampler is written against.
//!
//! A state space model supplies the density bundle
//!
//! ```text
//! g_θ(y_t | α_t)            observation density (marginal form)
//! g_θ(y_t | α_t, α_{t+1})   observation density given the next state
//! f_θ(α_{t+1} | α_t)        state transition (marginal form)
//! f_θ(α_{t+1} | α_t, y_t)   state transition given the current observation
//! μ_θ(α_1)                  stationary initial law
//! p(α_{j−1} | α_j, θ)       backward (time-reversed) prior
//! ```
//!
//! plus forward/backward proposal distributions, a prior over θ, and one sweep
//! of a posterior-invariant MCMC kernel. Models with correlated observation
//! and state shocks ("leverage") make `g` depend on the next state and `f` on
//! the current observation; plain models ignore those optional arguments, and
//! the two factorization forms coincide.
//!
//! All methods must be pure given their arguments; randomness enters only
//! through explicit RNG parameters, so implementations are safe to call
//! concurrently from many outer particles.

use rand_chacha::ChaCha8Rng;

pub trait Ssm: Send + Sync {
    type State: Clone + PartialEq + std::fmt::Debug + Send + Sync;
    type Obs: Clone + std::fmt::Debug + Send + Sync;
    type Theta: Clone + std::fmt::Debug + Send + Sync;

    /// `log g_θ(y | state)` or, with `next` given, `log g_θ(y | state, next)`.
    fn log_obs(&self, y: &Self::Obs, state: &Self::State, next: Option<&Self::State>, theta: &Self::Theta) -> f64;

    /// `log f_θ(next | prev)` or, with `y_prev` given, `log f_θ(next | prev, y_prev)`.
    fn log_trans(&self, next: &Self::State, prev: &Self::State, y_prev: Option<&Self::Obs>, theta: &Self::Theta) -> f64;

    /// `log μ_θ(state)`: stationary law of a single state.
    fn log_init(&self, state: &Self::State, theta: &Self::Theta) -> f64;

    /// `log p(prev | next, θ)`: the time-reversed transition under the
    /// stationary law.
    fn log_backward_prior(&self, prev: &Self::State, next: &Self::State, theta: &Self::Theta) -> f64;

    /// Whether a proposed state is numerically usable; the samplers reject
    /// moves whose proposals fail this check.
    fn state_is_valid(&self, state: &Self::State) -> bool;

    /// Draw from `q_{j,θ}(· | prev, y_j)`; `prev = None` is the initial
    /// proposal `q_{1,θ}(· | y_1)`.
    fn sample_forward_proposal(
        &self,
        j: usize,
        prev: Option<&Self::State>,
        y: &Self::Obs,
        theta: &Self::Theta,
        rng: &mut ChaCha8Rng,
    ) -> Self::State;

    fn log_forward_proposal(
        &self,
        j: usize,
        state: &Self::State,
        prev: Option<&Self::State>,
        y: &Self::Obs,
        theta: &Self::Theta,
    ) -> f64;

    /// Draw from `q_{j,θ}(· | next, y_j)` for the time-reversed pass.
    fn sample_backward_proposal(
        &self,
        j: usize,
        next: &Self::State,
        y: &Self::Obs,
        theta: &Self::Theta,
        rng: &mut ChaCha8Rng,
    ) -> Self::State;

    fn log_backward_proposal(
        &self,
        j: usize,
        state: &Self::State,
        next: &Self::State,
        y: &Self::Obs,
        theta: &Self::Theta,
    ) -> f64;

    fn sample_prior_theta(&self, rng: &mut ChaCha8Rng) -> Self::Theta;

    fn log_prior_theta(&self, theta: &Self::Theta) -> f64;

    /// One sweep of an MCMC kernel that leaves `π(θ, α | ys)` invariant over
    /// the window covered by `traj`/`ys` (index 0 of both is the same time).
    /// With `update_theta = false` only the states move.
    fn mcmc_kernel(
        &self,
        theta: &mut Self::Theta,
        traj: &mut [Self::State],
        ys: &[Self::Obs],
        update_theta: bool,
        rng: &mut ChaCha8Rng,
    );

    fn theta_dim(&self) -> usize;

    fn theta_names(&self) -> &'static [&'static str];

    fn theta_components(&self, theta: &Self::Theta) -> Vec<f64>;

    /// Scalar summary of a state for export (models here have scalar states).
    fn state_component(&self, state: &Self::State) -> f64;

    fn obs_dim(&self) -> usize;

    fn obs_components(&self, y: &Self::Obs) -> Vec<f64>;

    fn obs_from_components(&self, row: &[f64]) -> Option<Self::Obs>;

    /// Forward-simulate `n` observations and their latent states.
    fn simulate(&self, theta: &Self::Theta, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Self::Obs>, Vec<Self::State>);
}

/// `log π(θ, α_{s:t} | y_{s:t})` up to the model evidence: prior, initial
/// state, and forward-factorized transition/observation terms, with every
/// factor included.
pub fn log_joint<M: Ssm>(model: &M, theta: &M::Theta, traj: &[M::State], ys: &[M::Obs]) -> f64 {
    assert_eq!(traj.len(), ys.len());
    assert!(!traj.is_empty());
    let mut lp = model.log_prior_theta(theta);
    lp += model.log_init(&traj[0], theta);
    lp += model.log_obs(&ys[0], &traj[0], None, theta);
    for j in 1..traj.len() {
        lp += model.log_trans(&traj[j], &traj[j - 1], Some(&ys[j - 1]), theta);
        lp += model.log_obs(&ys[j], &traj[j], None, theta);
    }
    lp
}

/// The same joint evaluated through the time-reversed factorization: terminal
/// stationary law, backward priors, and leverage-form observation densities.
/// Agrees with [`log_joint`] for any model whose backward prior is exact;
/// kept as a consistency check.
pub fn backward_factorized_log_joint<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    traj: &[M::State],
    ys: &[M::Obs],
) -> f64 {
    assert_eq!(traj.len(), ys.len());
    assert!(!traj.is_empty());
    let n = traj.len();
    let mut lp = model.log_prior_theta(theta);
    lp += model.log_init(&traj[n - 1], theta);
    lp += model.log_obs(&ys[n - 1], &traj[n - 1], None, theta);
    for j in 1..n {
        lp += model.log_backward_prior(&traj[j - 1], &traj[j], theta);
        lp += model.log_obs(&ys[j - 1], &traj[j - 1], Some(&traj[j]), theta);
    }
    lp
}
