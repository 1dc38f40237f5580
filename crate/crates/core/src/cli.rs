//! The `qfb` command line: one subcommand per experiment, each writing its
//! tables and a run manifest into `--out`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::autodiff::fd_plateau;
use crate::controller::{Controller, Head, MlpParams};
use crate::error::{Error, Result};
use crate::filter::{estimate_series, DensityMatrix2};
use crate::quantum::{state_from_angles, BlochAngles, PhysParams, QubitState};
use crate::sde::{read_record_csv, read_trajectory_csv, NoiseGrid, Scheme, SolverConfig};
use crate::training::{
    batch_rng, derive_seed, evaluate, sample_initial_batch, simulate, target_state, train, trajectory_gradient,
    Architecture, Dynamics, LossConfig, TrainConfig, TrainKind,
};

pub const MANIFEST_SCHEMA: &str = "qubit-feedback/manifest/v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "qfb", version, about = "Feedback control of a continuously monitored qubit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Model checkpoint used as the controller (or as the starting point for `train`).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate monitored trajectories and write their checkpoints and homodyne records.
    Simulate(Common),
    /// Train a controller.
    Train(Common),
    /// Fidelity and drive statistics of a controller.
    Evaluate(Common),
    /// Compare a gradient path against frozen-noise finite differences.
    Gradcheck(Common),
    /// Reconstruct the conditioned state from a stored drive and homodyne record.
    Filter(Common),
    /// Controller performance for several decay rates.
    SweepKappa(Common),
    /// Drive of a state-aware controller on the stereographic disk of the southern hemisphere.
    Project(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Gradcheck(_) => "gradcheck",
            Command::Filter(_) => "filter",
            Command::SweepKappa(_) => "sweep-kappa",
            Command::Project(_) => "project",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Train(c)
            | Command::Evaluate(c)
            | Command::Gradcheck(c)
            | Command::Filter(c)
            | Command::SweepKappa(c)
            | Command::Project(c) => c,
        }
    }
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub git_describe: String,
    pub config: Value,
    pub seed: u64,
    pub workers: usize,
    pub model: Option<PathBuf>,
    pub artifacts: Vec<String>,
    pub started_unix: u64,
    pub wall_clock_s: f64,
}

impl RunManifest {
    /// Writes `manifest.json` into `dir` through a temporary file and a rename.
    pub fn write_atomic(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        {
            let mut f = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer_pretty(&mut f, self)?;
            f.write_all(b"\n")?;
            f.flush()?;
            f.get_ref().sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_reader(File::open(path)?)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Schema(format!("manifest schema `{}`", m.schema)));
        }
        Ok(m)
    }
}

/// Output directory that keeps track of what was written.
struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: vec![],
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, v)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    fn model(&mut self, name: &str, c: &Controller) -> Result<()> {
        let mut f = self.create(name)?;
        c.save(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

fn default_solver() -> SolverConfig {
    SolverConfig::new(Scheme::RkMilstein, 1e-3, 150, 20)
}

fn default_n_traj() -> usize {
    256
}

/// Where a non-trained drive comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    #[default]
    Handcrafted,
    Constant {
        omega: f64,
    },
    Model {
        path: PathBuf,
    },
}

impl ControllerSpec {
    fn build(&self, model: Option<&Path>, p: &PhysParams) -> Result<Controller> {
        if let Some(m) = model {
            return Controller::load_path(m);
        }
        match self {
            ControllerSpec::Handcrafted => Ok(Controller::Handcrafted { omega_max: p.omega_max }),
            ControllerSpec::Constant { omega } => Ok(Controller::Constant(*omega)),
            ControllerSpec::Model { path } => Controller::load_path(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Excited,
    Ground,
    Angles { theta: f64, phi: f64 },
}

impl InitialState {
    fn state(&self) -> QubitState {
        match *self {
            InitialState::Excited => QubitState::excited(),
            InitialState::Ground => QubitState::ground(),
            InitialState::Angles { theta, phi } => state_from_angles(BlochAngles::new(theta, phi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_solver")]
    pub solver: SolverConfig,
    #[serde(default)]
    pub phys: PhysParams,
    #[serde(default = "piecewise")]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default = "one")]
    pub n_traj: usize,
    /// Fixed initial state; sampled at random when absent.
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub seed: u64,
}

fn piecewise() -> Dynamics {
    Dynamics::Piecewise
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    #[serde(default = "default_solver")]
    pub solver: SolverConfig,
    #[serde(default)]
    pub phys: PhysParams,
    #[serde(default = "piecewise")]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    #[serde(default = "gc_kind")]
    pub kind: TrainKind,
    #[serde(default = "gc_arch")]
    pub architecture: Architecture,
    #[serde(default = "gc_solver")]
    pub solver: SolverConfig,
    #[serde(default)]
    pub phys: PhysParams,
    #[serde(default = "gc_loss")]
    pub loss: LossConfig,
    /// Number of randomly chosen parameter coordinates.
    #[serde(default = "gc_coords")]
    pub n_coords: usize,
    /// Finite-difference steps, searched for a plateau.
    #[serde(default = "gc_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "gc_tol")]
    pub ode_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn gc_kind() -> TrainKind {
    TrainKind::StatePiecewise
}
fn gc_arch() -> Architecture {
    Architecture::State {
        sizes: vec![4, 32, 16, 1],
    }
}
fn gc_solver() -> SolverConfig {
    SolverConfig::new(Scheme::RkMilstein, 1e-3, 30, 20)
}
fn gc_loss() -> LossConfig {
    LossConfig::new(0.8, 1.8, 1e-3)
}
fn gc_coords() -> usize {
    20
}
fn gc_eps() -> Vec<f64> {
    vec![1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6]
}
fn gc_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Checkpoint CSV written by `simulate`.
    pub trajectory: PathBuf,
    /// Homodyne record CSV written by `simulate`.
    pub record: PathBuf,
    pub n_sub: usize,
    pub dt: f64,
    #[serde(default)]
    pub phys: PhysParams,
    /// Prior; maximally mixed when absent.
    #[serde(default)]
    pub initial: Option<InitialState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "sw_delta")]
    pub delta: f64,
    #[serde(default = "sw_omega")]
    pub omega_max: f64,
    #[serde(default = "sw_ratios")]
    pub kappa_over_delta: Vec<f64>,
    #[serde(default = "sw_n")]
    pub n_traj: usize,
    #[serde(default = "default_solver")]
    pub solver: SolverConfig,
    #[serde(default = "piecewise")]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub seed: u64,
}

fn sw_delta() -> f64 {
    20.0
}
fn sw_omega() -> f64 {
    10.0
}
fn sw_ratios() -> Vec<f64> {
    vec![0.05, 0.01, 0.001]
}
fn sw_n() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Radial grid points on `[0, 1]`.
    #[serde(default = "pr_nr")]
    pub n_r: usize,
    /// Azimuthal grid points on `[0, 2 pi)`.
    #[serde(default = "pr_nphi")]
    pub n_phi: usize,
    #[serde(default)]
    pub phys: PhysParams,
    #[serde(default)]
    pub controller: ControllerSpec,
}

fn pr_nr() -> usize {
    21
}
fn pr_nphi() -> usize {
    72
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn read_value(path: Option<&Path>) -> Result<Value> {
    match path {
        Some(p) => {
            let f = File::open(p)?;
            serde_json::from_reader(f).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(Value::Object(Default::default())),
    }
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
}

/// Training configuration: a full document, or a `preset` name plus overrides.
pub fn train_config_from(v: Value) -> Result<TrainConfig> {
    let mut v = v;
    let preset = match v.as_object_mut().and_then(|o| o.remove("preset")) {
        Some(p) => Some(parse::<TrainKind>(p)?),
        None if v.as_object().is_some_and(|o| o.is_empty()) => Some(TrainKind::StatePiecewise),
        None => None,
    };
    let v = match preset {
        Some(k) => {
            let mut base = serde_json::to_value(TrainConfig::preset(k))?;
            merge(&mut base, v);
            base
        }
        None => v,
    };
    parse(v)
}

fn check_n_traj(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("n_traj must be at least 1".into()));
    }
    Ok(())
}

struct Ctx<'a> {
    common: &'a Common,
    out: Output,
}

/// Runs one command and writes its manifest.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let common = cli.command.common();
    if common.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let raw = read_value(common.config.as_deref())?;
    let mut ctx = Ctx {
        common,
        out: Output::new(&common.out)?,
    };
    let (config, seed) = match &cli.command {
        Command::Simulate(_) => cmd_simulate(&mut ctx, raw)?,
        Command::Train(_) => cmd_train(&mut ctx, raw)?,
        Command::Evaluate(_) => cmd_evaluate(&mut ctx, raw)?,
        Command::Gradcheck(_) => cmd_gradcheck(&mut ctx, raw)?,
        Command::Filter(_) => cmd_filter(&mut ctx, raw)?,
        Command::SweepKappa(_) => cmd_sweep_kappa(&mut ctx, raw)?,
        Command::Project(_) => cmd_project(&mut ctx, raw)?,
    };
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        command: cli.command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        git_describe: env!("QFB_GIT_DESCRIBE").into(),
        config,
        seed,
        workers: common.workers,
        model: common.model.clone(),
        artifacts: ctx.out.artifacts.clone(),
        started_unix,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    manifest.write_atomic(&ctx.out.dir)?;
    Ok(manifest)
}

fn cmd_simulate(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let mut cfg: SimulateConfig = parse(raw)?;
    if let Some(s) = ctx.common.seed {
        cfg.seed = s;
    }
    cfg.solver.validate()?;
    cfg.phys.validate()?;
    check_n_traj(cfg.n_traj)?;
    let ctrl = cfg.controller.build(ctx.common.model.as_deref(), &cfg.phys)?;
    let psi0: Vec<QubitState> = match cfg.initial {
        Some(s) => vec![s.state(); cfg.n_traj],
        None => sample_initial_batch(&mut batch_rng(cfg.seed, 20, 0), cfg.n_traj),
    };
    let noise_seed = derive_seed(cfg.seed, 21, 0);
    let steps = cfg.solver.total_steps();
    let target = target_state();
    for (j, s) in psi0.iter().enumerate() {
        let noise = NoiseGrid::for_trajectory(noise_seed, j as u64, steps, cfg.solver.dt);
        let tr = simulate(&ctrl, s, &noise, &cfg.solver, &cfg.phys, cfg.dynamics)?;
        let mut f = ctx.out.create(&format!("trajectory_{j:04}.csv"))?;
        tr.write_csv(&mut f, &target)?;
        f.flush()?;
        let mut f = ctx.out.create(&format!("record_{j:04}.csv"))?;
        tr.write_record_csv(&mut f, cfg.solver.dt)?;
        f.flush()?;
    }
    Ok((serde_json::to_value(&cfg)?, cfg.seed))
}

fn cmd_train(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let mut cfg = train_config_from(raw)?;
    if let Some(s) = ctx.common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    ctx.out.json("config.json", &cfg)?;
    let init = ctx.common.model.as_deref().map(Controller::load_path).transpose()?;
    let mut hist = csv::Writer::from_writer(ctx.out.create("history.csv")?);
    hist.write_record(["epoch", "mean_loss", "mean_fidelity", "grad_norm"])?;
    let dir = ctx.out.dir.clone();
    let mut saved = vec![];
    let every = cfg.checkpoint_every;
    let outcome = train(&cfg, init, ctx.common.workers, &mut |s, c| {
        hist.serialize((s.epoch, s.mean_loss, s.mean_fidelity, s.grad_norm))?;
        hist.flush()?;
        if every > 0 && (s.epoch + 1) % every == 0 {
            let name = format!("model_epoch{:05}.json", s.epoch + 1);
            c.save_path(&dir.join(&name))?;
            saved.push(name);
        }
        Ok(ControlFlow::Continue(()))
    })?;
    drop(hist);
    ctx.out.artifacts.extend(saved);
    ctx.out.model("model.json", &outcome.controller)?;
    Ok((serde_json::to_value(&cfg)?, cfg.seed))
}

fn cmd_evaluate(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let mut cfg: EvaluateConfig = parse(raw)?;
    if let Some(s) = ctx.common.seed {
        cfg.seed = s;
    }
    cfg.solver.validate()?;
    cfg.phys.validate()?;
    check_n_traj(cfg.n_traj)?;
    let ctrl = cfg.controller.build(ctx.common.model.as_deref(), &cfg.phys)?;
    let r = evaluate(&ctrl, cfg.n_traj, &cfg.solver, &cfg.phys, cfg.dynamics, cfg.seed)?;
    ctx.out.json("summary.json", &r.summary)?;
    let mut w = csv::Writer::from_writer(ctx.out.create("per_step.csv")?);
    w.write_record(["t", "mean_fidelity", "std_fidelity", "mean_omega", "std_omega"])?;
    for i in 0..r.times.len() {
        w.serialize((
            r.times[i],
            r.mean_fidelity[i],
            r.std_fidelity[i],
            r.mean_drive[i],
            r.std_drive[i],
        ))?;
    }
    w.flush()?;
    let mut f = ctx.out.create("ground.csv")?;
    r.ground.write_csv(&mut f, &target_state())?;
    f.flush()?;
    log::info!(
        "mean fidelity {:.4} +- {:.4} over {} trajectories",
        r.summary.mean_fidelity,
        r.summary.std_fidelity,
        r.summary.n_traj
    );
    Ok((serde_json::to_value(&cfg)?, cfg.seed))
}

/// Result of a gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub coordinates: Vec<usize>,
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub rel_err: Vec<f64>,
    pub max_rel_err: f64,
    pub cosine: f64,
}

/// Relative error with the denominator floored at `1e-3` of the largest
/// finite-difference magnitude, so near-zero coordinates do not dominate.
pub fn relative_errors(analytic: &[f64], fd: &[f64]) -> Vec<f64> {
    let floor = 1e-3 * fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / f.abs().max(floor).max(f64::MIN_POSITIVE))
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Gradient of one frozen-noise trajectory against central differences.
pub fn gradcheck(cfg: &GradcheckConfig, ctrl: &Controller) -> Result<GradcheckSummary> {
    use rand::seq::index::sample;
    cfg.solver.validate()?;
    cfg.phys.validate()?;
    let psi0 = sample_initial_batch(&mut batch_rng(cfg.seed, 30, 0), 1)[0];
    let steps = if cfg.kind == TrainKind::ClosedOde {
        0
    } else {
        cfg.solver.total_steps()
    };
    let noise = NoiseGrid::for_trajectory(derive_seed(cfg.seed, 31, 0), 0, steps, cfg.solver.dt);
    let grad = |c: &Controller| {
        trajectory_gradient(
            cfg.kind,
            c,
            &psi0,
            &noise,
            &cfg.solver,
            &cfg.phys,
            &cfg.loss,
            cfg.ode_tol,
        )
    };
    let g = grad(ctrl)?.grad;
    let n = ctrl.n_params();
    let k = cfg.n_coords.min(n);
    let mut coords = sample(&mut batch_rng(cfg.seed, 32, 0), n, k).into_vec();
    coords.sort_unstable();
    let theta = ctrl.flat();
    let mut loss = |th: &[f64]| {
        let mut c = ctrl.clone();
        c.set_flat(th)?;
        Ok(grad(&c)?.loss)
    };
    let fd = fd_plateau(&mut loss, &theta, &coords, &cfg.eps)?;
    let analytic: Vec<f64> = coords.iter().map(|&c| g[c]).collect();
    let rel_err = relative_errors(&analytic, &fd);
    Ok(GradcheckSummary {
        max_rel_err: rel_err.iter().cloned().fold(0.0, f64::max),
        cosine: cosine(&analytic, &fd),
        coordinates: coords,
        analytic,
        finite_difference: fd,
        rel_err,
    })
}

fn cmd_gradcheck(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let mut cfg: GradcheckConfig = parse(raw)?;
    if let Some(s) = ctx.common.seed {
        cfg.seed = s;
    }
    let ctrl = match ctx.common.model.as_deref() {
        Some(m) => Controller::load_path(m)?,
        None => cfg
            .architecture
            .init(cfg.phys.omega_max, derive_seed(cfg.seed, 33, 0))?,
    };
    let s = gradcheck(&cfg, &ctrl)?;
    let mut w = csv::Writer::from_writer(ctx.out.create("gradcheck.csv")?);
    w.write_record(["coordinate", "adjoint_grad", "fd_grad", "rel_err"])?;
    for i in 0..s.coordinates.len() {
        w.serialize((s.coordinates[i], s.analytic[i], s.finite_difference[i], s.rel_err[i]))?;
    }
    w.flush()?;
    ctx.out.json("gradcheck_summary.json", &s)?;
    log::info!("max relative error {:.3e}, cosine {:.6}", s.max_rel_err, s.cosine);
    Ok((serde_json::to_value(&cfg)?, cfg.seed))
}

/// Substep drives of a piecewise-constant trajectory: interval `i` carries
/// the drive stored at checkpoint `i + 1`.
pub fn substep_drives(checkpoint_drives: &[f64], n_sub: usize) -> Vec<f64> {
    checkpoint_drives
        .iter()
        .skip(1)
        .flat_map(|&d| std::iter::repeat_n(d, n_sub))
        .collect()
}

fn cmd_filter(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let cfg: FilterConfig = parse(raw)?;
    cfg.phys.validate()?;
    if cfg.n_sub == 0 || !(cfg.dt > 0.0) {
        return Err(Error::Config(format!("n_sub = {}, dt = {}", cfg.n_sub, cfg.dt)));
    }
    let rows = read_trajectory_csv(File::open(&cfg.trajectory)?)?;
    let dj = read_record_csv(File::open(&cfg.record)?)?;
    let drives: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let sub = substep_drives(&drives, cfg.n_sub);
    if sub.len() != dj.len() {
        return Err(Error::InconsistentTrajectory(format!(
            "{} checkpoints of {} substeps but {} record entries",
            rows.len(),
            cfg.n_sub,
            dj.len()
        )));
    }
    let rho0 = match cfg.initial {
        Some(s) => DensityMatrix2::pure(&s.state()),
        None => DensityMatrix2::maximally_mixed(),
    };
    let series = estimate_series(&rho0, &sub, &dj, cfg.dt, &cfg.phys)?;
    let mut w = csv::Writer::from_writer(ctx.out.create("bloch.csv")?);
    w.write_record(["step", "t", "x", "y", "z", "purity", "fidelity"])?;
    let target = target_state();
    let b = rho0.bloch();
    w.serialize((0, 0.0, b[0], b[1], b[2], rho0.purity(), rho0.fidelity(&target)))?;
    for (k, rho) in series.iter().enumerate() {
        let b = rho.bloch();
        w.serialize((
            k + 1,
            (k + 1) as f64 * cfg.dt,
            b[0],
            b[1],
            b[2],
            rho.purity(),
            rho.fidelity(&target),
        ))?;
    }
    w.flush()?;
    Ok((serde_json::to_value(&cfg)?, ctx.common.seed.unwrap_or(0)))
}

/// One row of the decay-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa_over_delta: f64,
    pub kappa: f64,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub final_infidelity: f64,
}

pub fn sweep_kappa(cfg: &SweepConfig, ctrl: &Controller) -> Result<Vec<SweepRow>> {
    check_n_traj(cfg.n_traj)?;
    cfg.kappa_over_delta
        .iter()
        .map(|&r| {
            let p = PhysParams::new(cfg.delta, r * cfg.delta, cfg.omega_max);
            p.validate()?;
            let e = evaluate(ctrl, cfg.n_traj, &cfg.solver, &p, cfg.dynamics, cfg.seed)?;
            Ok(SweepRow {
                kappa_over_delta: r,
                kappa: p.kappa,
                mean_fidelity: e.summary.mean_fidelity,
                std_fidelity: e.summary.std_fidelity,
                final_infidelity: e.summary.final_infidelity,
            })
        })
        .collect()
}

fn cmd_sweep_kappa(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let mut cfg: SweepConfig = parse(raw)?;
    if let Some(s) = ctx.common.seed {
        cfg.seed = s;
    }
    cfg.solver.validate()?;
    let p = PhysParams::new(cfg.delta, 0.0, cfg.omega_max);
    let ctrl = cfg.controller.build(ctx.common.model.as_deref(), &p)?;
    let rows = sweep_kappa(&cfg, &ctrl)?;
    let mut w = csv::Writer::from_writer(ctx.out.create("sweep.csv")?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok((serde_json::to_value(&cfg)?, cfg.seed))
}

/// `(R, Phi, Omega)` rows over the disk `R = cot(theta / 2) <= 1`.
pub fn project(ctrl: &Controller, n_r: usize, n_phi: usize) -> Result<Vec<[f64; 3]>> {
    if !ctrl.reads_state() {
        return Err(Error::Config(format!(
            "{} controller does not read the state",
            ctrl.kind()
        )));
    }
    if n_r < 2 || n_phi == 0 {
        return Err(Error::Config(format!("grid {n_r} x {n_phi}")));
    }
    let mut rows = Vec::with_capacity(n_r * n_phi);
    for i in 0..n_r {
        let r = i as f64 / (n_r - 1) as f64;
        let theta = 2.0 * (std::f64::consts::FRAC_PI_2 - r.atan());
        for k in 0..n_phi {
            let phi = std::f64::consts::TAU * k as f64 / n_phi as f64;
            let s = state_from_angles(BlochAngles::new(theta, phi));
            rows.push([r, phi, ctrl.drive_for_state(&s.as_array())?]);
        }
    }
    Ok(rows)
}

fn cmd_project(ctx: &mut Ctx, raw: Value) -> Result<(Value, u64)> {
    let cfg: ProjectConfig = parse(raw)?;
    cfg.phys.validate()?;
    let ctrl = cfg.controller.build(ctx.common.model.as_deref(), &cfg.phys)?;
    let rows = project(&ctrl, cfg.n_r, cfg.n_phi)?;
    let mut w = csv::Writer::from_writer(ctx.out.create("project.csv")?);
    w.write_record(["r", "phi", "omega"])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok((serde_json::to_value(&cfg)?, ctx.common.seed.unwrap_or(0)))
}

/// A fresh state-aware network, for examples and tests.
pub fn random_state_net(sizes: &[usize], omega_max: f64, seed: u64) -> Result<Controller> {
    Ok(Controller::State(MlpParams::init(
        sizes,
        Head::Softsign { scale: omega_max },
        seed,
    )?))
}
