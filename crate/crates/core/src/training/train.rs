use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::autodiff::{
    adjoint_ode_backward, adjoint_sde_backward, chain_backprop, rollout_with_sensitivities, AdjointDrive, PiecewiseKind,
};
use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::quantum::{PhysParams, QubitState};
use crate::rollout::{rollout, rollout_ode, DriveMode};
use crate::sde::{NoiseGrid, SolverConfig, TrajectoryRecord};

use super::{
    adam_step, batch_rng, derive_seed, loss_eval, sample_initial_batch, target_state, AdamState, LossConfig,
    TrainConfig, TrainKind,
};

/// Trajectories summed sequentially inside one parallel task. Fixed so that
/// the reduction order never depends on the worker count.
const CHUNK: usize = 4;

pub(crate) const TAG_INIT: u64 = 0;
pub(crate) const TAG_STATES: u64 = 1;
pub(crate) const TAG_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_fidelity: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub controller: Controller,
    pub history: Vec<EpochStats>,
    pub adam: AdamState,
}

/// Loss, whole-interval mean fidelity and parameter gradient of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryGradient {
    pub loss: f64,
    pub mean_fidelity: f64,
    pub grad: Vec<f64>,
    pub traj: TrajectoryRecord,
}

/// Simulates one trajectory and differentiates its loss along the path that
/// matches `kind`.
#[allow(clippy::too_many_arguments)]
pub fn trajectory_gradient(
    kind: TrainKind,
    ctrl: &Controller,
    psi0: &QubitState,
    noise: &NoiseGrid,
    scfg: &SolverConfig,
    p: &PhysParams,
    lcfg: &LossConfig,
    ode_tol: f64,
) -> Result<TrajectoryGradient> {
    let target = target_state();
    let (traj, loss, grad) = match kind {
        TrainKind::StatePiecewise | TrainKind::CurrentRecord => {
            let (traj, sens) = rollout_with_sensitivities(psi0, ctrl, noise, scfg, p)?;
            let (loss, lg) = loss_eval(&traj, &target, lcfg);
            let pk = if kind == TrainKind::CurrentRecord {
                PiecewiseKind::Current
            } else {
                PiecewiseKind::StatePw
            };
            let g = chain_backprop(&traj, &sens, &lg, ctrl, pk)?;
            (traj, loss, g)
        }
        TrainKind::StateContinuous => {
            let traj = rollout(psi0, ctrl, noise, scfg, p, DriveMode::PerSubstep)?;
            let (loss, lg) = loss_eval(&traj, &target, lcfg);
            let adj = adjoint_sde_backward(&traj, noise, ctrl, &lg, p, scfg, AdjointDrive::Continuous)?;
            (traj, loss, adj.a_theta)
        }
        TrainKind::ClosedOde => {
            let traj = rollout_ode(psi0, ctrl, scfg.n_checkpoints, scfg.t_end(), p, ode_tol)?;
            let (loss, lg) = loss_eval(&traj, &target, lcfg);
            let adj = adjoint_ode_backward(&traj, ctrl, &lg, p, ode_tol)?;
            (traj, loss, adj.a_theta)
        }
    };
    let f = traj.fidelities(&target);
    let mean_fidelity = f.iter().sum::<f64>() / f.len().max(1) as f64;
    Ok(TrajectoryGradient {
        loss,
        mean_fidelity,
        grad,
        traj,
    })
}

fn diagnostic(epoch: usize, j: usize, psi0: &QubitState, tg: &TrajectoryGradient) -> Error {
    let d = &tg.traj.drives;
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bad_grad = tg.grad.iter().filter(|g| !g.is_finite()).count();
    Error::NonFiniteLoss {
        epoch,
        detail: format!(
            "trajectory {j} from {:?}: loss {}, drives in [{lo}, {hi}], {bad_grad} non-finite gradient entries, noise stream {}",
            psi0.as_array(),
            tg.loss,
            tg.traj.stream
        ),
    }
}

struct Partial {
    loss: f64,
    fid: f64,
    grad: Vec<f64>,
}

/// Batch-mean loss, fidelity and gradient of one epoch.
fn epoch_batch(cfg: &TrainConfig, ctrl: &Controller, epoch: usize) -> Result<(f64, f64, Vec<f64>)> {
    let b = cfg.batch_size;
    let psi0 = sample_initial_batch(&mut batch_rng(cfg.seed, TAG_STATES, epoch as u64), b);
    let noise_seed = derive_seed(cfg.seed, TAG_NOISE, epoch as u64);
    let n_par = ctrl.n_params();
    let steps = cfg.solver.total_steps();
    let idx: Vec<usize> = (0..b).collect();
    let parts: Vec<Result<Partial>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Partial {
                loss: 0.0,
                fid: 0.0,
                grad: vec![0.0; n_par],
            };
            for &j in chunk {
                let noise = match cfg.kind {
                    TrainKind::ClosedOde => NoiseGrid::zeros(0, cfg.solver.dt),
                    _ => NoiseGrid::for_trajectory(noise_seed, j as u64, steps, cfg.solver.dt),
                };
                let tg = trajectory_gradient(
                    cfg.kind,
                    ctrl,
                    &psi0[j],
                    &noise,
                    &cfg.solver,
                    &cfg.phys,
                    &cfg.loss,
                    cfg.ode_tol,
                )?;
                if !tg.loss.is_finite() || tg.grad.iter().any(|g| !g.is_finite()) {
                    return Err(diagnostic(epoch, j, &psi0[j], &tg));
                }
                acc.loss += tg.loss;
                acc.fid += tg.mean_fidelity;
                for (a, g) in acc.grad.iter_mut().zip(&tg.grad) {
                    *a += g;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut loss = 0.0;
    let mut fid = 0.0;
    let mut grad = vec![0.0; n_par];
    for p in parts {
        let p = p?;
        loss += p.loss;
        fid += p.fid;
        for (a, g) in grad.iter_mut().zip(&p.grad) {
            *a += g;
        }
    }
    let inv = 1.0 / b as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, fid * inv, grad))
}

/// Runs `cfg.epochs` Adam epochs starting from `init` (or a fresh network
/// seeded from `cfg.seed`). `on_epoch` sees the statistics and the updated
/// controller after every epoch. Returning `Break` ends training early and
/// keeps the controller; returning an error aborts.
///
/// Results are bit-identical for any `workers`.
pub fn train(
    cfg: &TrainConfig,
    init: Option<Controller>,
    workers: usize,
    on_epoch: &mut dyn FnMut(&EpochStats, &Controller) -> Result<ControlFlow<()>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut ctrl = match init {
        Some(c) => c,
        None => cfg
            .architecture
            .init(cfg.phys.omega_max, derive_seed(cfg.seed, TAG_INIT, 0))?,
    };
    if cfg.kind == TrainKind::CurrentRecord && !matches!(ctrl, Controller::Current(_))
        || cfg.kind != TrainKind::CurrentRecord && !matches!(ctrl, Controller::State(_))
    {
        return Err(Error::Config(format!(
            "{} controller cannot be trained as {:?}",
            ctrl.kind(),
            cfg.kind
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut params = ctrl.flat();
    let mut adam = AdamState::new(params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, fid, grad) = pool.install(|| epoch_batch(cfg, &ctrl, epoch))?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("batch mean loss {loss}"),
            });
        }
        adam_step(&mut adam, &mut params, &grad, cfg.learning_rate)?;
        ctrl.set_flat(&params)?;
        let stats = EpochStats {
            epoch,
            mean_loss: loss,
            mean_fidelity: fid,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        };
        log::info!(
            "epoch {epoch}: loss {loss:.6} fidelity {fid:.4} |grad| {:.3e}",
            stats.grad_norm
        );
        let flow = on_epoch(&stats, &ctrl)?;
        history.push(stats);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainOutcome {
        controller: ctrl,
        history,
        adam,
    })
}
