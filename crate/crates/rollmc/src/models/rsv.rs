//! Realized stochastic volatility model with leverage:
//!
//! ```text
//! y1_t    = exp(α_t / 2) ε_t                      daily log return
//! y2_t    = α_t + ξ + u_t,    u_t ~ N(0, σ_u²)    log realized variance
//! α_{t+1} = μ + φ (α_t − μ) + η_t                 latent log volatility
//! α_1     ~ N(μ, σ_η² / (1 − φ²))
//! corr(ε_t, η_t) = ρ,  u_t independent            leverage
//! ```
//!
//! The leverage correlation makes the observation density depend on the next
//! state (`g(y_t | α_t, α_{t+1})` conditions ε on η) and the transition on the
//! current return (`f(α_{t+1} | α_t, y_t)` conditions η on ε); the two
//! factorizations of the joint coincide by the usual bivariate-normal
//! identities.
//!
//! Proposals are Gaussian approximations built by one Newton step of the log
//! observation term around the forward/backward prior mean, falling back to
//! the prior when the curvature is not negative. The MCMC kernel is
//! MH-within-Gibbs: states in random-length blocks with those proposals,
//! conjugate draws for ξ, σ_u² and μ, and a joint random-walk MH step on
//! transformed (φ, σ_η², ρ).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::gauss::{draw_normal, normal_logpdf};
use crate::model::Ssm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsvTheta {
    pub mu: f64,
    pub phi: f64,
    pub sig_eta2: f64,
    pub xi: f64,
    pub sig_u2: f64,
    pub rho: f64,
}

impl RsvTheta {
    pub fn in_support(&self) -> bool {
        self.mu.is_finite()
            && self.xi.is_finite()
            && self.phi.abs() < 1.0
            && self.rho.abs() < 1.0
            && self.sig_eta2 > 0.0
            && self.sig_eta2.is_finite()
            && self.sig_u2 > 0.0
            && self.sig_u2.is_finite()
    }
}

/// One observation: the daily log return and the log realized variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsvObs {
    pub ret: f64,
    pub log_rv: f64,
}

/// Hyperparameters. Defaults are weakly informative SV choices:
/// `μ ~ N(0, 10)`, `(φ+1)/2 ~ Beta(20, 1.5)`, `σ_η² ~ IG(5/2, 0.05/2)`,
/// `ξ ~ N(0, 10)`, `σ_u² ~ IG(5/2, 0.05/2)`, `ρ ~ U(−1, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct RsvPriors {
    pub mu_var: f64,
    pub xi_var: f64,
    pub phi_beta: (f64, f64),
    pub sig_eta_ig: (f64, f64),
    pub sig_u_ig: (f64, f64),
}

impl Default for RsvPriors {
    fn default() -> Self {
        Self {
            mu_var: 10.0,
            xi_var: 10.0,
            phi_beta: (20.0, 1.5),
            sig_eta_ig: (2.5, 0.025),
            sig_u_ig: (2.5, 0.025),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RsvModel {
    pub priors: RsvPriors,
    /// Random-walk step sizes on (atanh φ, ln σ_η², atanh ρ); fixed for
    /// reproducibility, tuned once on simulated data.
    pub rw_steps: [f64; 3],
    /// Maximum state-block length in the MCMC kernel.
    pub block_max: usize,
}

impl Default for RsvModel {
    fn default() -> Self {
        Self { priors: RsvPriors::default(), rw_steps: [0.06, 0.12, 0.10], block_max: 5 }
    }
}

/// One Newton step of `log prior × likelihood` from the prior mean: with
/// `(d1, d2)` the score and curvature of the log likelihood term at `m_p`,
/// the proposal is `N(m_p + d1/(1/v_p − d2), 1/(1/v_p − d2))`. Falls back to
/// the prior when the curvature is not usable.
fn newton_gaussian(m_p: f64, v_p: f64, d1: f64, d2: f64) -> (f64, f64) {
    if !(d2 < 0.0) || !d1.is_finite() {
        return (m_p, v_p);
    }
    let var = 1.0 / (1.0 / v_p - d2);
    (m_p + d1 * var, var)
}

impl RsvModel {
    fn sig_eta(theta: &RsvTheta) -> f64 {
        theta.sig_eta2.sqrt()
    }

    fn stationary_var(theta: &RsvTheta) -> f64 {
        theta.sig_eta2 / (1.0 - theta.phi * theta.phi)
    }

    /// Score and curvature in α of `log g(y | α)` (marginal form).
    fn obs_marginal_grad(y: &RsvObs, alpha: f64, theta: &RsvTheta) -> (f64, f64) {
        let e = y.ret * y.ret * (-alpha).exp();
        let d1 = -0.5 + 0.5 * e + (y.log_rv - theta.xi - alpha) / theta.sig_u2;
        let d2 = -0.5 * e - 1.0 / theta.sig_u2;
        (d1, d2)
    }

    /// Score and curvature in α_j of `log g(y | α_j, α_{j+1})` (leverage form)
    /// with α_{j+1} fixed.
    fn obs_leverage_grad(y: &RsvObs, alpha: f64, next: f64, theta: &RsvTheta) -> (f64, f64) {
        let c = theta.rho / Self::sig_eta(theta);
        let eta = next - theta.mu - theta.phi * (alpha - theta.mu);
        let ea2 = (0.5 * alpha).exp();
        let m = ea2 * c * eta;
        let mp = ea2 * c * (0.5 * eta - theta.phi);
        let mpp = ea2 * c * (0.25 * eta - theta.phi);
        let v = alpha.exp() * (1.0 - theta.rho * theta.rho);
        let r = y.ret - m;
        let d1 = r * mp / v + 0.5 * r * r / v - 0.5 + (y.log_rv - theta.xi - alpha) / theta.sig_u2;
        let d2 = (-mp * mp + r * mpp - 2.0 * r * mp - 0.5 * r * r) / v - 1.0 / theta.sig_u2;
        (d1, d2)
    }

    fn forward_proposal_moments(&self, prev: Option<&f64>, y: &RsvObs, theta: &RsvTheta) -> (f64, f64) {
        let (m_p, v_p) = match prev {
            Some(&p) => (theta.mu + theta.phi * (p - theta.mu), theta.sig_eta2),
            None => (theta.mu, Self::stationary_var(theta)),
        };
        let (d1, d2) = Self::obs_marginal_grad(y, m_p, theta);
        newton_gaussian(m_p, v_p, d1, d2)
    }

    fn backward_proposal_moments(&self, next: f64, y: &RsvObs, theta: &RsvTheta) -> (f64, f64) {
        let m_p = theta.mu + theta.phi * (next - theta.mu);
        let v_p = theta.sig_eta2;
        let (d1, d2) = Self::obs_leverage_grad(y, m_p, next, theta);
        newton_gaussian(m_p, v_p, d1, d2)
    }

    // --- MCMC kernel pieces -------------------------------------------------

    /// Metropolis–Hastings update of the state block `[a, b)` given its
    /// boundaries, with sequentially built Newton proposals.
    fn mh_state_block(
        &self,
        theta: &RsvTheta,
        traj: &mut [f64],
        ys: &[RsvObs],
        a: usize,
        b: usize,
        rng: &mut ChaCha8Rng,
    ) {
        let n = traj.len();
        let mut prop = Vec::with_capacity(b - a);
        let mut log_prop = 0.0; // target minus proposal density, proposed path
        let mut log_cur = 0.0; // same at the current path
        for j in a..b {
            let prev_prop: Option<f64> = if j == 0 { None } else if j == a { Some(traj[j - 1]) } else { Some(prop[j - a - 1]) };
            let prev_cur: Option<f64> = if j == 0 { None } else { Some(traj[j - 1]) };
            let (mq, vq) = self.forward_proposal_moments(prev_prop.as_ref(), &ys[j], theta);
            let cand = draw_normal(mq, vq, rng);
            log_prop += match prev_prop {
                Some(p) => self.log_trans(&cand, &p, Some(&ys[j - 1]), theta),
                None => self.log_init(&cand, theta),
            } + self.log_obs(&ys[j], &cand, None, theta)
                - normal_logpdf(cand, mq, vq);
            let (mqc, vqc) = self.forward_proposal_moments(prev_cur.as_ref(), &ys[j], theta);
            log_cur += match prev_cur {
                Some(p) => self.log_trans(&traj[j], &p, Some(&ys[j - 1]), theta),
                None => self.log_init(&traj[j], theta),
            } + self.log_obs(&ys[j], &traj[j], None, theta)
                - normal_logpdf(traj[j], mqc, vqc);
            prop.push(cand);
        }
        if b < n {
            log_prop += self.log_trans(&traj[b], &prop[b - a - 1], Some(&ys[b - 1]), theta);
            log_cur += self.log_trans(&traj[b], &traj[b - 1], Some(&ys[b - 1]), theta);
        }
        let u: f64 = rng.gen();
        if u.ln() < log_prop - log_cur {
            traj[a..b].copy_from_slice(&prop);
        }
    }

    fn update_states(&self, theta: &RsvTheta, traj: &mut [f64], ys: &[RsvObs], rng: &mut ChaCha8Rng) {
        let n = traj.len();
        let mut start = 0usize;
        while start < n {
            let len = rng.gen_range(1..=self.block_max);
            let end = (start + len).min(n);
            self.mh_state_block(theta, traj, ys, start, end, rng);
            start = end;
        }
    }

    /// Conjugate draws of ξ and σ_u² from the linear-Gaussian log-RV equation.
    fn update_xi_sigu(&self, theta: &mut RsvTheta, traj: &[f64], ys: &[RsvObs], rng: &mut ChaCha8Rng) {
        let n = traj.len() as f64;
        let zsum: f64 = ys.iter().zip(traj).map(|(y, a)| y.log_rv - a).sum();
        let prec = 1.0 / self.priors.xi_var + n / theta.sig_u2;
        let mean = (zsum / theta.sig_u2) / prec;
        theta.xi = draw_normal(mean, 1.0 / prec, rng);

        let (a0, b0) = self.priors.sig_u_ig;
        let ss: f64 = ys
            .iter()
            .zip(traj)
            .map(|(y, a)| {
                let d = y.log_rv - a - theta.xi;
                d * d
            })
            .sum();
        let g = rand_distr::Gamma::new(a0 + 0.5 * n, 1.0).unwrap();
        let gd: f64 = rng.sample(g);
        theta.sig_u2 = (b0 + 0.5 * ss) / gd;
    }

    /// Conjugate draw of μ given states, returns and the remaining parameters.
    fn update_mu(&self, theta: &mut RsvTheta, traj: &[f64], ys: &[RsvObs], rng: &mut ChaCha8Rng) {
        let n = traj.len();
        let r2 = 1.0 - theta.rho * theta.rho;
        let se = Self::sig_eta(theta);
        let mut prec = 1.0 / self.priors.mu_var;
        let mut cross = 0.0;
        // initial state: α_1 ~ N(μ, σ_η²/(1−φ²))
        let w0 = (1.0 - theta.phi * theta.phi) / theta.sig_eta2;
        prec += w0;
        cross += traj[0] * w0;
        // transitions: α_{j+1} − φ α_j − ρ σ_η ε_j = μ(1−φ) + N(0, σ_η²(1−ρ²))
        let wt = (1.0 - theta.phi) * (1.0 - theta.phi) / (theta.sig_eta2 * r2);
        for j in 0..n - 1 {
            let eps = ys[j].ret * (-0.5 * traj[j]).exp();
            let w = traj[j + 1] - theta.phi * traj[j] - theta.rho * se * eps;
            prec += wt;
            cross += w * (1.0 - theta.phi) / (theta.sig_eta2 * r2);
        }
        theta.mu = draw_normal(cross / prec, 1.0 / prec, rng);
    }

    /// Log posterior kernel of (φ, σ_η², ρ) given everything else, used by the
    /// random-walk step. The ε and y2 densities do not involve these
    /// parameters and are omitted.
    fn dynamics_logpost(&self, theta: &RsvTheta, traj: &[f64], ys: &[RsvObs]) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        let se = Self::sig_eta(theta);
        let r2 = 1.0 - theta.rho * theta.rho;
        let mut lp = self.log_prior_phi_sigeta_rho(theta);
        lp += normal_logpdf(traj[0], theta.mu, Self::stationary_var(theta));
        for j in 0..traj.len() - 1 {
            let eps = ys[j].ret * (-0.5 * traj[j]).exp();
            let mean = theta.mu + theta.phi * (traj[j] - theta.mu) + theta.rho * se * eps;
            lp += normal_logpdf(traj[j + 1], mean, theta.sig_eta2 * r2);
        }
        lp
    }

    fn log_prior_phi_sigeta_rho(&self, theta: &RsvTheta) -> f64 {
        let (ba, bb) = self.priors.phi_beta;
        let x = 0.5 * (theta.phi + 1.0);
        let lbeta = ln_gamma(ba) + ln_gamma(bb) - ln_gamma(ba + bb);
        let phi_lp = (ba - 1.0) * x.ln() + (bb - 1.0) * (1.0 - x).ln() - lbeta + 0.5f64.ln();
        let (ia, ib) = self.priors.sig_eta_ig;
        let ig_lp =
            ia * ib.ln() - ln_gamma(ia) - (ia + 1.0) * theta.sig_eta2.ln() - ib / theta.sig_eta2;
        let rho_lp = -(2.0f64.ln()); // U(−1, 1)
        phi_lp + ig_lp + rho_lp
    }

    fn update_phi_sigeta_rho(
        &self,
        theta: &mut RsvTheta,
        traj: &[f64],
        ys: &[RsvObs],
        rng: &mut ChaCha8Rng,
    ) {
        let trans = |th: &RsvTheta| [th.phi.atanh(), th.sig_eta2.ln(), th.rho.atanh()];
        let untrans = |x: &[f64; 3], th: &RsvTheta| RsvTheta {
            phi: x[0].tanh(),
            sig_eta2: x[1].exp(),
            rho: x[2].tanh(),
            ..*th
        };
        let log_jac = |th: &RsvTheta| {
            (1.0 - th.phi * th.phi).ln() + th.sig_eta2.ln() + (1.0 - th.rho * th.rho).ln()
        };
        let cur = trans(theta);
        let mut prop_x = cur;
        for (i, step) in self.rw_steps.iter().enumerate() {
            prop_x[i] += step * draw_normal(0.0, 1.0, rng);
        }
        let prop = untrans(&prop_x, theta);
        let delta = self.dynamics_logpost(&prop, traj, ys) + log_jac(&prop)
            - self.dynamics_logpost(theta, traj, ys)
            - log_jac(theta);
        let u: f64 = rng.gen();
        if u.ln() < delta {
            *theta = prop;
        }
    }
}

impl Ssm for RsvModel {
    type State = f64;
    type Obs = RsvObs;
    type Theta = RsvTheta;

    fn log_obs(&self, y: &RsvObs, state: &f64, next: Option<&f64>, theta: &RsvTheta) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        let rv_part = normal_logpdf(y.log_rv, state + theta.xi, theta.sig_u2);
        let ret_part = match next {
            None => normal_logpdf(y.ret, 0.0, state.exp()),
            Some(&nx) => {
                let eta = nx - theta.mu - theta.phi * (state - theta.mu);
                let mean = (0.5 * state).exp() * theta.rho * eta / Self::sig_eta(theta);
                let var = state.exp() * (1.0 - theta.rho * theta.rho);
                normal_logpdf(y.ret, mean, var)
            }
        };
        rv_part + ret_part
    }

    fn log_trans(&self, next: &f64, prev: &f64, y_prev: Option<&RsvObs>, theta: &RsvTheta) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        match y_prev {
            None => normal_logpdf(*next, theta.mu + theta.phi * (prev - theta.mu), theta.sig_eta2),
            Some(y) => {
                let eps = y.ret * (-0.5 * prev).exp();
                let mean =
                    theta.mu + theta.phi * (prev - theta.mu) + theta.rho * Self::sig_eta(theta) * eps;
                normal_logpdf(*next, mean, theta.sig_eta2 * (1.0 - theta.rho * theta.rho))
            }
        }
    }

    fn log_init(&self, state: &f64, theta: &RsvTheta) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        normal_logpdf(*state, theta.mu, Self::stationary_var(theta))
    }

    fn log_backward_prior(&self, prev: &f64, next: &f64, theta: &RsvTheta) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        normal_logpdf(*prev, theta.mu + theta.phi * (next - theta.mu), theta.sig_eta2)
    }

    fn state_is_valid(&self, state: &f64) -> bool {
        state.is_finite()
    }

    fn sample_forward_proposal(
        &self,
        _j: usize,
        prev: Option<&f64>,
        y: &RsvObs,
        theta: &RsvTheta,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let (m, v) = self.forward_proposal_moments(prev, y, theta);
        draw_normal(m, v, rng)
    }

    fn log_forward_proposal(
        &self,
        _j: usize,
        state: &f64,
        prev: Option<&f64>,
        y: &RsvObs,
        theta: &RsvTheta,
    ) -> f64 {
        let (m, v) = self.forward_proposal_moments(prev, y, theta);
        normal_logpdf(*state, m, v)
    }

    fn sample_backward_proposal(
        &self,
        _j: usize,
        next: &f64,
        y: &RsvObs,
        theta: &RsvTheta,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let (m, v) = self.backward_proposal_moments(*next, y, theta);
        draw_normal(m, v, rng)
    }

    fn log_backward_proposal(
        &self,
        _j: usize,
        state: &f64,
        next: &f64,
        y: &RsvObs,
        theta: &RsvTheta,
    ) -> f64 {
        let (m, v) = self.backward_proposal_moments(*next, y, theta);
        normal_logpdf(*state, m, v)
    }

    fn sample_prior_theta(&self, rng: &mut ChaCha8Rng) -> RsvTheta {
        let (ba, bb) = self.priors.phi_beta;
        let beta = rand_distr::Beta::new(ba, bb).unwrap();
        let phi_raw: f64 = rng.sample(beta);
        let (ea, eb) = self.priors.sig_eta_ig;
        let (ua, ub) = self.priors.sig_u_ig;
        let ge: f64 = rng.sample(rand_distr::Gamma::new(ea, 1.0).unwrap());
        let gu: f64 = rng.sample(rand_distr::Gamma::new(ua, 1.0).unwrap());
        RsvTheta {
            mu: draw_normal(0.0, self.priors.mu_var, rng),
            phi: (2.0 * phi_raw - 1.0).clamp(-0.9999, 0.9999),
            sig_eta2: eb / ge,
            xi: draw_normal(0.0, self.priors.xi_var, rng),
            sig_u2: ub / gu,
            rho: rng.gen_range(-1.0..1.0),
        }
    }

    fn log_prior_theta(&self, theta: &RsvTheta) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        let (ua, ub) = self.priors.sig_u_ig;
        let ig_u = ua * ub.ln() - ln_gamma(ua) - (ua + 1.0) * theta.sig_u2.ln() - ub / theta.sig_u2;
        normal_logpdf(theta.mu, 0.0, self.priors.mu_var)
            + normal_logpdf(theta.xi, 0.0, self.priors.xi_var)
            + ig_u
            + self.log_prior_phi_sigeta_rho(theta)
    }

    fn mcmc_kernel(
        &self,
        theta: &mut RsvTheta,
        traj: &mut [f64],
        ys: &[RsvObs],
        update_theta: bool,
        rng: &mut ChaCha8Rng,
    ) {
        debug_assert_eq!(traj.len(), ys.len());
        self.update_states(theta, traj, ys, rng);
        if update_theta {
            self.update_xi_sigu(theta, traj, ys, rng);
            self.update_mu(theta, traj, ys, rng);
            self.update_phi_sigeta_rho(theta, traj, ys, rng);
        }
    }

    fn theta_dim(&self) -> usize {
        6
    }

    fn theta_names(&self) -> &'static [&'static str] {
        &["mu", "phi", "sigma_eta2", "xi", "sigma_u2", "rho"]
    }

    fn theta_components(&self, theta: &RsvTheta) -> Vec<f64> {
        vec![theta.mu, theta.phi, theta.sig_eta2, theta.xi, theta.sig_u2, theta.rho]
    }

    fn state_component(&self, state: &f64) -> f64 {
        *state
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn obs_components(&self, y: &RsvObs) -> Vec<f64> {
        vec![y.ret, y.log_rv]
    }

    fn obs_from_components(&self, row: &[f64]) -> Option<RsvObs> {
        if row.len() < 2 {
            return None;
        }
        Some(RsvObs { ret: row[0], log_rv: row[1] })
    }

    fn simulate(&self, theta: &RsvTheta, n: usize, rng: &mut ChaCha8Rng) -> (Vec<RsvObs>, Vec<f64>) {
        assert!(theta.in_support(), "theta out of support");
        let se = Self::sig_eta(theta);
        let mut alpha = theta.mu + draw_normal(0.0, Self::stationary_var(theta), rng);
        let mut ys = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            states.push(alpha);
            let z1 = draw_normal(0.0, 1.0, rng);
            let z2 = draw_normal(0.0, 1.0, rng);
            let eps = theta.rho * z1 + (1.0 - theta.rho * theta.rho).sqrt() * z2;
            let eta = se * z1;
            let u = draw_normal(0.0, theta.sig_u2, rng);
            ys.push(RsvObs {
                ret: (0.5 * alpha).exp() * eps,
                log_rv: alpha + theta.xi + u,
            });
            alpha = theta.mu + theta.phi * (alpha - theta.mu) + eta;
        }
        (ys, states)
    }
}
