//! Subcommand implementations.

use std::path::{Path, PathBuf};

use rollmc::engine::{Engine, ResultRow, RunMode, StepDiag};
use rollmc::kalman::{conjugate_posterior, NigPrior};
use rollmc::models::linear_gaussian::LgModel;
use rollmc::models::rsv::RsvModel;
use rollmc::rng::{RngStream, StreamPhase};
use rollmc::{Error as EngineError, Ssm};

use crate::config::{ModelKind, RunConfig};
use crate::csvio::Table;

/// Errors mapped to process exit codes: usage/config → 2, numerical → 3,
/// I/O → 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numerical(m) => m,
        }
    }
}

fn io_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(io_err)
}

fn data_header<M: Ssm>(model: &M) -> Vec<&'static str> {
    match model.obs_dim() {
        1 => vec!["t", "y1", "alpha_true"],
        2 => vec!["t", "y1", "y2", "alpha_true"],
        _ => unreachable!("models here have 1- or 2-dimensional observations"),
    }
}

fn simulate_model<M: Ssm>(
    model: &M,
    theta: &M::Theta,
    t_total: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let mut rng = RngStream::new(seed).global(0, StreamPhase::Simulate);
    let (ys, states) = model.simulate(theta, t_total, &mut rng);
    let header = data_header(model);
    let mut table = Table::new(&header);
    for (i, (y, st)) in ys.iter().zip(&states).enumerate() {
        let mut row = vec![(i + 1) as f64];
        row.extend(model.obs_components(y));
        row.push(model.state_component(st));
        table.push(row);
    }
    ensure_out_dir(out)?;
    table.write(&out.join("data.csv"), &[0]).map_err(io_err)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.model {
        ModelKind::LinearGaussian => {
            let model = LgModel::new(cfg.proposal);
            simulate_model(&model, &cfg.lg_truth, cfg.t_total, cfg.engine.seed, &cfg.out)
        }
        ModelKind::Rsv => {
            let model = RsvModel::default();
            simulate_model(&model, &cfg.rsv_truth, cfg.t_total, cfg.engine.seed, &cfg.out)
        }
    }
}

/// Load the observation record for `model` from a data CSV written by
/// `simulate` (or following the same schema).
pub fn load_data<M: Ssm>(model: &M, path: &Path) -> Result<Vec<M::Obs>, CliError> {
    let table = Table::read(path).map_err(CliError::Usage)?;
    let expect = data_header(model);
    if table.header != expect {
        return Err(CliError::Usage(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expect.join(","),
            table.header.join(",")
        )));
    }
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let obs = model
            .obs_from_components(&row[1..1 + model.obs_dim()])
            .ok_or_else(|| CliError::Usage("malformed observation row".into()))?;
        out.push(obs);
    }
    Ok(out)
}

fn results_header<M: Ssm>(model: &M) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in model.theta_names() {
        h.push(format!("{name}_mean"));
        h.push(format!("{name}_q025"));
        h.push(format!("{name}_q975"));
    }
    for extra in ["log_ml", "r1", "r2", "ess", "resampled_add", "resampled_remove"] {
        h.push(extra.to_string());
    }
    h
}

fn push_result_row(table: &mut Table, row: &ResultRow) {
    let mut cells = vec![row.t as f64];
    for p in &row.params {
        cells.push(p.mean);
        cells.push(p.q025);
        cells.push(p.q975);
    }
    cells.push(row.log_ml);
    cells.push(row.r1);
    cells.push(row.r2);
    cells.push(row.ess);
    cells.push(row.resampled_add as u8 as f64);
    cells.push(row.resampled_remove as u8 as f64);
    table.push(cells);
}

const DIAG_HEADER: [&str; 12] = [
    "t",
    "ess_prev",
    "ess_after_add",
    "resampled_add",
    "ess_after_remove",
    "resampled_remove",
    "r1",
    "r2",
    "log_incr_add",
    "log_incr_remove",
    "log_incr_remove_direct",
    "log_ml",
];

fn push_diag_row(table: &mut Table, d: &StepDiag) {
    table.push(vec![
        d.t as f64,
        d.ess_prev,
        d.ess_after_add,
        d.resampled_add as u8 as f64,
        d.ess_after_remove,
        d.resampled_remove as u8 as f64,
        d.r1,
        d.r2,
        d.log_incr_add,
        d.log_incr_remove,
        d.log_incr_remove_direct,
        d.log_ml,
    ]);
}

struct RunFiles {
    results: Table,
    diags: Table,
    logml: Table,
    timings: Table,
}

impl RunFiles {
    fn new<M: Ssm>(model: &M) -> Self {
        let header = results_header(model);
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        Self {
            results: Table::new(&header_refs),
            diags: Table::new(&DIAG_HEADER),
            logml: Table::new(&["t", "log_ml"]),
            timings: Table::new(&["t", "wall_ms"]),
        }
    }

    fn push(&mut self, row: &ResultRow, diag: &StepDiag) {
        push_result_row(&mut self.results, row);
        push_diag_row(&mut self.diags, diag);
        self.logml.push(vec![diag.t as f64, diag.log_ml]);
        self.timings.push(vec![diag.t as f64, diag.wall_ms]);
    }

    fn write(&self, out: &Path) -> Result<(), CliError> {
        ensure_out_dir(out)?;
        let flag0 = self.results.header.len() - 2;
        self.results
            .write(&out.join("results.csv"), &[0, flag0, flag0 + 1])
            .map_err(io_err)?;
        self.diags.write(&out.join("diagnostics.csv"), &[0, 3, 5]).map_err(io_err)?;
        self.logml.write(&out.join("logml.csv"), &[0]).map_err(io_err)?;
        // Wall times are the one non-deterministic output; they live in their
        // own file so everything else is byte-identical across reruns.
        self.timings.write(&out.join("timings.csv"), &[0]).map_err(io_err)
    }
}

fn run_model<M: Ssm>(model: &M, cfg: &RunConfig, data: Vec<M::Obs>) -> Result<(), CliError> {
    let mut engine = Engine::new(model, cfg.engine.clone(), data)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut files = RunFiles::new(model);
    let init_upto = match cfg.mode {
        RunMode::Sequential => engine.data_len(),
        _ => engine.config().window,
    };

    let numerical = |files: &RunFiles, out: &Path, e: EngineError| -> CliError {
        // Dump whatever was collected before aborting.
        let _ = files.write(out);
        CliError::Numerical(format!(
            "numerical failure: {e}; partial diagnostics written to {}",
            out.display()
        ))
    };

    match drive(&mut engine, init_upto, cfg.mode, &mut files) {
        Ok(()) => files.write(&cfg.out),
        Err(e) => Err(numerical(&files, &cfg.out, e)),
    }
}

fn drive<M: Ssm>(
    engine: &mut Engine<'_, M>,
    init_upto: usize,
    mode: RunMode,
    files: &mut RunFiles,
) -> Result<(), EngineError> {
    for d in engine.initialize(init_upto)? {
        let row = engine.result_row(&d)?;
        files.push(&row, &d);
    }
    if mode != RunMode::Sequential {
        while engine.window_bounds().1 < engine.data_len() {
            let d = engine.roll_once()?;
            let row = engine.result_row(&d)?;
            files.push(&row, &d);
        }
    }
    Ok(())
}

pub fn cmd_run(cfg: &RunConfig) -> Result<(), CliError> {
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("run needs `data = <csv>` in the config".into()))?;
    match cfg.model {
        ModelKind::LinearGaussian => {
            let model = LgModel::new(cfg.proposal);
            let data = load_data(&model, &data_path)?;
            run_model(&model, cfg, data)
        }
        ModelKind::Rsv => {
            let model = RsvModel::default();
            let data = load_data(&model, &data_path)?;
            run_model(&model, cfg, data)
        }
    }
}

pub fn cmd_oracle_lg(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.model != ModelKind::LinearGaussian {
        return Err(CliError::Usage("oracle-lg only supports model = lg".into()));
    }
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("oracle-lg needs `data = <csv>` in the config".into()))?;
    let model = LgModel::new(cfg.proposal);
    let data = load_data(&model, &data_path)?;
    let window = cfg.engine.window;
    if data.len() < window {
        return Err(CliError::Usage("window longer than the data".into()));
    }
    let prior = NigPrior::default();
    let mut table = Table::new(&[
        "t",
        "mu_mean",
        "mu_q025",
        "mu_q975",
        "sigma2_mean",
        "sigma2_q025",
        "sigma2_q975",
        "log_ml",
    ]);
    let windows: Vec<(usize, usize)> = match cfg.mode {
        RunMode::Sequential => (1..=data.len()).map(|t| (1usize, t)).collect(),
        _ => (window..=data.len()).map(|t| (t + 1 - window, t)).collect(),
    };
    for (s, t) in windows {
        let post = conjugate_posterior(&data[s - 1..t], &prior, model.phi);
        table.push(vec![
            t as f64,
            post.params.mean_mu(),
            post.params.mu_quantile(0.025),
            post.params.mu_quantile(0.975),
            post.params.mean_sigma2(),
            post.params.sigma2_quantile(0.025),
            post.params.sigma2_quantile(0.975),
            post.log_ml,
        ]);
    }
    ensure_out_dir(&cfg.out)?;
    table.write(&cfg.out.join("oracle.csv"), &[0]).map_err(io_err)
}

pub fn cmd_diagnose(path: &PathBuf) -> Result<(), CliError> {
    let table = Table::read(path).map_err(CliError::Usage)?;
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| CliError::Usage(format!("{} lacks column `{name}`", path.display())))
    };
    let stats = |idx: usize| {
        let mut vals: Vec<f64> =
            table.rows.iter().map(|r| r[idx]).filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            return (f64::NAN, f64::NAN, f64::NAN);
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        (mean, vals[vals.len() / 2], sd)
    };
    let (r1c, r2c) = (col("r1")?, col("r2")?);
    let (ra, rr) = (col("resampled_add")?, col("resampled_remove")?);
    let steps = table.rows.len();
    let rolling = table.rows.iter().filter(|r| r[r2c].is_finite()).count();
    let (m1, med1, sd1) = stats(r1c);
    let (m2, med2, sd2) = stats(r2c);
    let adds: usize = table.rows.iter().map(|r| r[ra] as usize).sum();
    let rems: usize = table.rows.iter().map(|r| r[rr] as usize).sum();
    println!("steps: {steps} (initialization {}, rolling {rolling})", steps - rolling);
    println!("R1: mean {m1:.4}  median {med1:.4}  sd {sd1:.4}");
    println!("R2: mean {m2:.4}  median {med2:.4}  sd {sd2:.4}");
    println!("resample-move events: add-step {adds}, remove-step {rems}");
    if let Ok(mlc) = col("log_ml") {
        if let Some(last) = table.rows.last() {
            println!("final log_ml: {}", last[mlc]);
        }
    }
    Ok(())
}
