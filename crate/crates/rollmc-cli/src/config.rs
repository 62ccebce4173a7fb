//! Flat `key = value` run configuration with strict unknown-key rejection.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rollmc::engine::{EngineConfig, ResamplingScheme, RunMode};
use rollmc::models::linear_gaussian::LgProposal;
use rollmc::models::rsv::RsvTheta;
use rollmc::models::LgTheta;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearGaussian,
    Rsv,
}

/// Everything a run needs, parsed and validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub mode: RunMode,
    pub engine: EngineConfig,
    pub proposal: LgProposal,
    pub t_total: usize,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: usize,
    pub lg_truth: LgTheta,
    pub rsv_truth: RsvTheta,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::LinearGaussian,
            mode: RunMode::Rolling,
            engine: EngineConfig::default(),
            proposal: LgProposal::FullyAdapted,
            t_total: 200,
            data: None,
            out: PathBuf::from("."),
            threads: 0,
            lg_truth: LgTheta { mu: 0.3, sigma2: 0.03 },
            rsv_truth: RsvTheta {
                mu: -0.5,
                phi: 0.95,
                sig_eta2: 0.1,
                xi: -0.3,
                sig_u2: 0.2,
                rho: -0.4,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError(format!("invalid value for `{key}`: `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError(format!("invalid boolean for `{key}`: `{v}`"))),
    }
}

pub fn parse_mode(v: &str) -> Result<RunMode, ConfigError> {
    match v {
        "rolling" => Ok(RunMode::Rolling),
        "sequential" => Ok(RunMode::Sequential),
        "simple" => Ok(RunMode::Simple),
        _ => Err(ConfigError(format!(
            "invalid mode `{v}` (valid: rolling, sequential, simple)"
        ))),
    }
}

pub fn parse_model(v: &str) -> Result<ModelKind, ConfigError> {
    match v {
        "lg" | "linear-gaussian" => Ok(ModelKind::LinearGaussian),
        "rsv" => Ok(ModelKind::Rsv),
        _ => Err(ConfigError(format!("invalid model `{v}` (valid: lg, rsv)"))),
    }
}

impl RunConfig {
    /// Parse a config file of `key = value` lines (`#` comments allowed) and
    /// reject any unknown key.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            let key = k.trim().to_string();
            if kv.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError(format!("duplicate key `{key}`")));
            }
        }
        let mut cfg = RunConfig::default();
        for (k, v) in &kv {
            match k.as_str() {
                "model" => cfg.model = parse_model(v)?,
                "mode" => cfg.mode = parse_mode(v)?,
                "n_particles" => cfg.engine.n_particles = parse_num(k, v)?,
                "n_inner" => cfg.engine.n_inner = parse_num(k, v)?,
                "block_len" => cfg.engine.block_len = parse_num(k, v)?,
                "window" => cfg.engine.window = parse_num(k, v)?,
                "ess_threshold" => cfg.engine.ess_threshold = parse_num(k, v)?,
                "mcmc_sweeps" => cfg.engine.mcmc_sweeps = parse_num(k, v)?,
                "use_smoother" => cfg.engine.use_smoother = parse_bool(k, v)?,
                "resampling" => {
                    cfg.engine.resampling = match v.as_str() {
                        "multinomial" => ResamplingScheme::Multinomial,
                        "systematic" => ResamplingScheme::Systematic,
                        _ => {
                            return Err(ConfigError(format!(
                                "invalid resampling `{v}` (valid: multinomial, systematic)"
                            )))
                        }
                    }
                }
                "seed" => cfg.engine.seed = parse_num(k, v)?,
                "theta_update_min_window" => {
                    cfg.engine.theta_update_min_window = Some(parse_num(k, v)?)
                }
                "proposal" => {
                    cfg.proposal = match v.as_str() {
                        "fully_adapted" => LgProposal::FullyAdapted,
                        "prior" => LgProposal::Prior,
                        _ => {
                            return Err(ConfigError(format!(
                                "invalid proposal `{v}` (valid: fully_adapted, prior)"
                            )))
                        }
                    }
                }
                "t_total" => cfg.t_total = parse_num(k, v)?,
                "data" => cfg.data = Some(PathBuf::from(v)),
                "out" => cfg.out = PathBuf::from(v),
                "threads" => cfg.threads = parse_num(k, v)?,
                "lg_mu" => cfg.lg_truth.mu = parse_num(k, v)?,
                "lg_sigma2" => cfg.lg_truth.sigma2 = parse_num(k, v)?,
                "rsv_mu" => cfg.rsv_truth.mu = parse_num(k, v)?,
                "rsv_phi" => cfg.rsv_truth.phi = parse_num(k, v)?,
                "rsv_sigma_eta2" => cfg.rsv_truth.sig_eta2 = parse_num(k, v)?,
                "rsv_xi" => cfg.rsv_truth.xi = parse_num(k, v)?,
                "rsv_sigma_u2" => cfg.rsv_truth.sig_u2 = parse_num(k, v)?,
                "rsv_rho" => cfg.rsv_truth.rho = parse_num(k, v)?,
                _ => return Err(ConfigError(format!("unknown key `{k}`"))),
            }
        }
        cfg.engine.mode = cfg.mode;
        Ok(cfg)
    }
}
