//! Univariate linear Gaussian test model with conjugate (μ, σ²) prior:
//!
//! ```text
//! y_t     = α_t + ε_t,                 ε_t ~ N(0, σ²)
//! α_{t+1} = μ + φ (α_t − μ) + η_t,     η_t ~ N(0, 2σ²)      (φ fixed)
//! α_1     ~ N(μ, 2σ² / (1 − φ²))
//! μ | σ²  ~ N(0, 10σ²),   σ² ~ IG(5/2, 0.05/2)
//! ```
//!
//! Everything about this model is available in closed form (Kalman filter,
//! conjugate posterior, exact simulation smoother), which is what makes it
//! useful: the particle samplers can be checked against exact answers. Both a
//! fully adapted proposal (the exact one-step conditional, which makes inner
//! weights ancestor-only) and the prior proposal are provided; the MCMC kernel
//! is one exact Gibbs sweep (simulation smoother for α, Normal–Inverse-Gamma
//! draw for (μ, σ²)).

use rand_chacha::ChaCha8Rng;

use crate::gauss::{draw_normal, normal_logpdf};
use crate::kalman::{
    lg_conditional_nig, simulation_smoother, Ar1Ssm, FilterInit, NigParams, NigPrior,
};
use crate::model::Ssm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgProposal {
    /// `q_j = p(α_j | α_{j−1}, y_j, θ)` (and the exact analogs at the window
    /// edge and in the backward pass).
    FullyAdapted,
    /// `q_j = f_θ(α_j | α_{j−1})`, backward `q_j = p(α_j | α_{j+1}, θ)`.
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgTheta {
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone)]
pub struct LgModel {
    pub prior: NigPrior,
    pub phi: f64,
    pub proposal: LgProposal,
}

impl LgModel {
    pub fn new(proposal: LgProposal) -> Self {
        Self { prior: NigPrior::default(), phi: 0.25, proposal }
    }

    pub fn ar1(&self, theta: &LgTheta) -> Ar1Ssm {
        Ar1Ssm::from_lg(theta.mu, theta.sigma2, self.phi)
    }

    fn state_var(&self, theta: &LgTheta) -> f64 {
        2.0 * theta.sigma2
    }

    fn stationary_var(&self, theta: &LgTheta) -> f64 {
        2.0 * theta.sigma2 / (1.0 - self.phi * self.phi)
    }

    /// Exact Gaussian conditional given a prior N(m, v) on the state and the
    /// observation y with noise σ².
    fn adapt(&self, m: f64, v: f64, y: f64, sigma2: f64) -> (f64, f64) {
        let prec = 1.0 / v + 1.0 / sigma2;
        let var = 1.0 / prec;
        (var * (m / v + y / sigma2), var)
    }

    fn forward_proposal_moments(&self, prev: Option<&f64>, y: f64, theta: &LgTheta) -> (f64, f64) {
        let (m, v) = match prev {
            Some(&p) => (theta.mu + self.phi * (p - theta.mu), self.state_var(theta)),
            None => (theta.mu, self.stationary_var(theta)),
        };
        match self.proposal {
            LgProposal::FullyAdapted => self.adapt(m, v, y, theta.sigma2),
            LgProposal::Prior => (m, v),
        }
    }

    fn backward_proposal_moments(&self, next: f64, y: f64, theta: &LgTheta) -> (f64, f64) {
        let m = theta.mu + self.phi * (next - theta.mu);
        let v = self.state_var(theta);
        match self.proposal {
            LgProposal::FullyAdapted => self.adapt(m, v, y, theta.sigma2),
            LgProposal::Prior => (m, v),
        }
    }
}

impl Ssm for LgModel {
    type State = f64;
    type Obs = f64;
    type Theta = LgTheta;

    fn log_obs(&self, y: &f64, state: &f64, _next: Option<&f64>, theta: &LgTheta) -> f64 {
        normal_logpdf(*y, *state, theta.sigma2)
    }

    fn log_trans(&self, next: &f64, prev: &f64, _y_prev: Option<&f64>, theta: &LgTheta) -> f64 {
        normal_logpdf(*next, theta.mu + self.phi * (prev - theta.mu), self.state_var(theta))
    }

    fn log_init(&self, state: &f64, theta: &LgTheta) -> f64 {
        normal_logpdf(*state, theta.mu, self.stationary_var(theta))
    }

    fn log_backward_prior(&self, prev: &f64, next: &f64, theta: &LgTheta) -> f64 {
        // Stationary AR(1) is time-reversible with identical coefficients.
        normal_logpdf(*prev, theta.mu + self.phi * (next - theta.mu), self.state_var(theta))
    }

    fn state_is_valid(&self, state: &f64) -> bool {
        state.is_finite()
    }

    fn sample_forward_proposal(
        &self,
        _j: usize,
        prev: Option<&f64>,
        y: &f64,
        theta: &LgTheta,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let (m, v) = self.forward_proposal_moments(prev, *y, theta);
        draw_normal(m, v, rng)
    }

    fn log_forward_proposal(
        &self,
        _j: usize,
        state: &f64,
        prev: Option<&f64>,
        y: &f64,
        theta: &LgTheta,
    ) -> f64 {
        match (self.proposal, prev) {
            // Route prior-mode densities through the same expressions as the
            // model densities so that q and f cancel exactly.
            (LgProposal::Prior, Some(p)) => self.log_trans(state, p, None, theta),
            (LgProposal::Prior, None) => self.log_init(state, theta),
            _ => {
                let (m, v) = self.forward_proposal_moments(prev, *y, theta);
                normal_logpdf(*state, m, v)
            }
        }
    }

    fn sample_backward_proposal(
        &self,
        _j: usize,
        next: &f64,
        y: &f64,
        theta: &LgTheta,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let (m, v) = self.backward_proposal_moments(*next, *y, theta);
        draw_normal(m, v, rng)
    }

    fn log_backward_proposal(
        &self,
        _j: usize,
        state: &f64,
        next: &f64,
        y: &f64,
        theta: &LgTheta,
    ) -> f64 {
        match self.proposal {
            LgProposal::Prior => self.log_backward_prior(state, next, theta),
            LgProposal::FullyAdapted => {
                let (m, v) = self.backward_proposal_moments(*next, *y, theta);
                normal_logpdf(*state, m, v)
            }
        }
    }

    fn sample_prior_theta(&self, rng: &mut ChaCha8Rng) -> LgTheta {
        let p = NigParams {
            m: self.prior.m0,
            v: self.prior.v0,
            a: self.prior.a0,
            b: self.prior.b0,
        };
        let (mu, sigma2) = p.sample(rng);
        LgTheta { mu, sigma2 }
    }

    fn log_prior_theta(&self, theta: &LgTheta) -> f64 {
        if !(theta.sigma2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        let ig = self.prior.a0 * self.prior.b0.ln()
            - statrs::function::gamma::ln_gamma(self.prior.a0)
            - (self.prior.a0 + 1.0) * theta.sigma2.ln()
            - self.prior.b0 / theta.sigma2;
        ig + normal_logpdf(theta.mu, self.prior.m0, self.prior.v0 * theta.sigma2)
    }

    fn mcmc_kernel(
        &self,
        theta: &mut LgTheta,
        traj: &mut [f64],
        ys: &[f64],
        update_theta: bool,
        rng: &mut ChaCha8Rng,
    ) {
        debug_assert_eq!(traj.len(), ys.len());
        let m = self.ar1(theta);
        let path = simulation_smoother(&m, ys, FilterInit::Stationary, rng);
        traj.copy_from_slice(&path);
        if update_theta {
            let nig = lg_conditional_nig(traj, ys, &self.prior, self.phi);
            let (mu, sigma2) = nig.sample(rng);
            *theta = LgTheta { mu, sigma2 };
        }
    }

    fn theta_dim(&self) -> usize {
        2
    }

    fn theta_names(&self) -> &'static [&'static str] {
        &["mu", "sigma2"]
    }

    fn theta_components(&self, theta: &LgTheta) -> Vec<f64> {
        vec![theta.mu, theta.sigma2]
    }

    fn state_component(&self, state: &f64) -> f64 {
        *state
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn obs_components(&self, y: &f64) -> Vec<f64> {
        vec![*y]
    }

    fn obs_from_components(&self, row: &[f64]) -> Option<f64> {
        row.first().copied()
    }

    fn simulate(&self, theta: &LgTheta, n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        assert!(theta.sigma2 > 0.0, "sigma2 must be positive");
        let mut alpha = draw_normal(theta.mu, self.stationary_var(theta), rng);
        let mut ys = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            states.push(alpha);
            ys.push(draw_normal(alpha, theta.sigma2, rng));
            alpha = draw_normal(theta.mu + self.phi * (alpha - theta.mu), self.state_var(theta), rng);
        }
        (ys, states)
    }
}
