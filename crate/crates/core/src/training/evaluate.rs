use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::Controller;
use crate::error::Result;
use crate::quantum::{PhysParams, QubitState};
use crate::rollout::{rollout, rollout_ode, DriveMode};
use crate::sde::{NoiseGrid, SolverConfig, TrajectoryRecord};

use super::{batch_rng, derive_seed, sample_initial_batch, target_state, Dynamics, TAIL_CHECKPOINTS};

const TAG_EVAL_STATES: u64 = 10;
const TAG_EVAL_NOISE: u64 = 11;

/// One closed-loop trajectory from `psi0`.
pub fn simulate(
    ctrl: &Controller,
    psi0: &QubitState,
    noise: &NoiseGrid,
    scfg: &SolverConfig,
    p: &PhysParams,
    dynamics: Dynamics,
) -> Result<TrajectoryRecord> {
    match dynamics {
        Dynamics::Piecewise => rollout(psi0, ctrl, noise, scfg, p, DriveMode::PerCheckpoint),
        Dynamics::Continuous => rollout(psi0, ctrl, noise, scfg, p, DriveMode::PerSubstep),
        Dynamics::ClosedOde { tol } => rollout_ode(psi0, ctrl, scfg.n_checkpoints, scfg.t_end(), p, tol),
    }
}

/// Scalar statistics of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_traj: usize,
    /// Mean over all trajectories and checkpoints.
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    /// Same, restricted to the last 50 checkpoints.
    pub tail_mean_fidelity: f64,
    pub tail_std_fidelity: f64,
    /// Mean `1 - F` at the final checkpoint.
    pub final_infidelity: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub times: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub std_fidelity: Vec<f64>,
    pub mean_drive: Vec<f64>,
    pub std_drive: Vec<f64>,
    /// Trajectory started in the ground state, on the first noise stream.
    pub ground: TrajectoryRecord,
}

fn mean_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        s += x;
        s2 += x * x;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = s / n as f64;
    (m, (s2 / n as f64 - m * m).max(0.0).sqrt())
}

/// Statistics of `ctrl` over `n_traj` random initial states and fresh noise.
pub fn evaluate(
    ctrl: &Controller,
    n_traj: usize,
    scfg: &SolverConfig,
    p: &PhysParams,
    dynamics: Dynamics,
    seed: u64,
) -> Result<EvalReport> {
    scfg.validate()?;
    let psi0 = sample_initial_batch(&mut batch_rng(seed, TAG_EVAL_STATES, 0), n_traj);
    let noise_seed = derive_seed(seed, TAG_EVAL_NOISE, 0);
    let steps = match dynamics {
        Dynamics::ClosedOde { .. } => 0,
        _ => scfg.total_steps(),
    };
    let run = |psi: &QubitState, j: usize| {
        let noise = NoiseGrid::for_trajectory(noise_seed, j as u64, steps, scfg.dt);
        simulate(ctrl, psi, &noise, scfg, p, dynamics)
    };
    let trajs: Vec<TrajectoryRecord> = psi0
        .par_iter()
        .enumerate()
        .map(|(j, s)| run(s, j))
        .collect::<Result<Vec<_>>>()?;
    let ground = run(&QubitState::ground(), 0)?;

    let target = target_state();
    let fids: Vec<Vec<f64>> = trajs.iter().map(|t| t.fidelities(&target)).collect();
    let m = scfg.n_checkpoints + 1;
    let mut mean_fidelity = Vec::with_capacity(m);
    let mut std_fidelity = Vec::with_capacity(m);
    let mut mean_drive = Vec::with_capacity(m);
    let mut std_drive = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = mean_std(fids.iter().map(|f| f[i]));
        mean_fidelity.push(a);
        std_fidelity.push(b);
        let (a, b) = mean_std(trajs.iter().map(|t| t.drives[i]));
        mean_drive.push(a);
        std_drive.push(b);
    }
    let tail = TAIL_CHECKPOINTS.min(m);
    let (mf, sf) = mean_std(fids.iter().flatten().copied());
    let (tm, ts) = mean_std(fids.iter().flat_map(|f| f[m - tail..].iter().copied()));
    let final_infidelity = fids.iter().map(|f| 1.0 - f[m - 1]).sum::<f64>() / n_traj.max(1) as f64;
    Ok(EvalReport {
        summary: EvalSummary {
            n_traj,
            mean_fidelity: mf,
            std_fidelity: sf,
            tail_mean_fidelity: tm,
            tail_std_fidelity: ts,
            final_infidelity,
        },
        times: (0..m).map(|i| scfg.checkpoint_time(i)).collect(),
        mean_fidelity,
        std_fidelity,
        mean_drive,
        std_drive,
        ground,
    })
}
