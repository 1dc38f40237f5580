//! Closed-loop forward simulation of single trajectories.

use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerInput};
use crate::error::{Error, Result};
use crate::quantum::{drift, expect_pauli_raw, homodyne_increment, Axis, PhysParams, QubitState, Vec4};
use crate::sde::{step_const, step_with, NoiseGrid, Rk54, SolverConfig, TrajectoryRecord};

/// How often the controller is consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Once per checkpoint; the drive is held over the following interval and
    /// the drive at `t_0` is zero.
    PerCheckpoint,
    /// At every solver stage, so the controller sits inside the drift.
    PerSubstep,
}

/// Inputs of the record-driven controller at checkpoint `i`: the homodyne
/// record of the previous interval (zeros at `i = 0`) and the `m` most
/// recent drives `drives[i], drives[i-1], ...`, zero-padded.
pub fn record_input(dj: &[f64], drives: &[f64], i: usize, n_sub: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let j_tau = if i == 0 {
        vec![0.0; n_sub]
    } else {
        dj[(i - 1) * n_sub..i * n_sub].to_vec()
    };
    let omega_m = (0..m).map(|k| if k <= i { drives[i - k] } else { 0.0 }).collect();
    (j_tau, omega_m)
}

/// Controller input at checkpoint `i` of a partially built trajectory.
pub fn checkpoint_input(
    ctrl: &Controller,
    state: &QubitState,
    dj: &[f64],
    drives: &[f64],
    i: usize,
    n_sub: usize,
) -> ControllerInput {
    match ctrl {
        Controller::Current(net) => {
            let (j_tau, omega_m) = record_input(dj, drives, i, net.record_len(), net.memory_len());
            debug_assert_eq!(net.record_len(), n_sub);
            ControllerInput::Record { j_tau, omega_m }
        }
        _ => ControllerInput::State(state.as_array()),
    }
}

fn check_shapes(ctrl: &Controller, noise: &NoiseGrid, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if noise.len() < cfg.total_steps() {
        return Err(Error::DimensionMismatch(format!(
            "{} noise increments for {} substeps",
            noise.len(),
            cfg.total_steps()
        )));
    }
    match ctrl {
        Controller::State(n) if n.n_in() != 4 || n.n_out() != 1 => Err(Error::DimensionMismatch(format!(
            "state controller of sizes {:?}",
            n.sizes()
        ))),
        Controller::Current(n) if n.record_len() != cfg.n_sub => Err(Error::DimensionMismatch(format!(
            "record controller reads {} substeps, intervals have {}",
            n.record_len(),
            cfg.n_sub
        ))),
        _ => Ok(()),
    }
}

/// Simulates one monitored trajectory under `ctrl`.
pub fn rollout(
    psi0: &QubitState,
    ctrl: &Controller,
    noise: &NoiseGrid,
    cfg: &SolverConfig,
    p: &PhysParams,
    mode: DriveMode,
) -> Result<TrajectoryRecord> {
    check_shapes(ctrl, noise, cfg)?;
    if mode == DriveMode::PerSubstep && !ctrl.reads_state() {
        return Err(Error::Config(
            "the record-driven controller can only act at checkpoints".into(),
        ));
    }
    let n = cfg.n_checkpoints;
    let mut states = Vec::with_capacity(n + 1);
    let mut drives = Vec::with_capacity(n + 1);
    let mut dj = Vec::with_capacity(cfg.total_steps());
    let mut v = psi0.as_array();
    states.push(*psi0);
    drives.push(match mode {
        DriveMode::PerCheckpoint => 0.0,
        DriveMode::PerSubstep => ctrl.drive_for_state(&v)?,
    });
    for i in 0..n {
        let slice = noise.interval(i, cfg.n_sub);
        match mode {
            DriveMode::PerCheckpoint => {
                let input = checkpoint_input(ctrl, &states[i], &dj, &drives, i, cfg.n_sub);
                let om = ctrl.drive(&input)?;
                for &dw in slice {
                    dj.push(homodyne_increment(expect_pauli_raw(&v, Axis::X), cfg.dt, dw, p.kappa));
                    v = step_const(cfg.scheme, &v, om, cfg.dt, dw, p)?;
                }
                drives.push(om);
            }
            DriveMode::PerSubstep => {
                let mut err = None;
                for &dw in slice {
                    dj.push(homodyne_increment(expect_pauli_raw(&v, Axis::X), cfg.dt, dw, p.kappa));
                    let mut om = |x: &Vec4| {
                        ctrl.drive_for_state(x).unwrap_or_else(|e| {
                            err.get_or_insert(e);
                            0.0
                        })
                    };
                    v = step_with(cfg.scheme, &v, cfg.dt, dw, p, &mut om)?;
                }
                if let Some(e) = err {
                    return Err(e);
                }
                drives.push(ctrl.drive_for_state(&v)?);
            }
        }
        states.push(QubitState::from_array(v));
    }
    Ok(TrajectoryRecord {
        times: (0..=n).map(|i| cfg.checkpoint_time(i)).collect(),
        states,
        drives,
        dj,
        seed: noise.seed,
        stream: noise.stream,
    })
}

/// Closed-system trajectory under continuous state feedback, integrated
/// adaptively between the checkpoints `t_i = i * t_end / n`.
pub fn rollout_ode(
    psi0: &QubitState,
    ctrl: &Controller,
    n: usize,
    t_end: f64,
    p: &PhysParams,
    tol: f64,
) -> Result<TrajectoryRecord> {
    if !ctrl.reads_state() {
        return Err(Error::Config(
            "closed-system control needs a state-aware controller".into(),
        ));
    }
    let mut rk = Rk54::new(tol);
    let mut err = None;
    let mut f = |_t: f64, y: &Vec4| {
        let om = ctrl.drive_for_state(y).unwrap_or_else(|e| {
            err.get_or_insert(e);
            0.0
        });
        drift(y, om, p)
    };
    let times: Vec<f64> = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
    let mut states = vec![*psi0];
    let mut v = psi0.as_array();
    let mut h = (t_end / n as f64).min(1e-2);
    for i in 0..n {
        let (y, _, next) = rk.integrate(&v, times[i], times[i + 1], h, &mut f)?;
        v = y;
        h = next;
        states.push(QubitState::from_array(v));
    }
    if let Some(e) = err {
        return Err(e);
    }
    let drives = states
        .iter()
        .map(|s| ctrl.drive_for_state(&s.as_array()))
        .collect::<Result<_>>()?;
    Ok(TrajectoryRecord {
        times,
        states,
        drives,
        dj: vec![],
        seed: 0,
        stream: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{CurrentNetParams, Head, MlpParams};
    use crate::quantum::{fidelity, state_from_angles, BlochAngles};
    use crate::sde::Scheme;

    #[test]
    fn record_input_layout() {
        let dj: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let drives = [0.0, 1.0, 2.0, 3.0];
        let (j, m) = record_input(&dj, &drives, 0, 2, 3);
        assert_eq!(j, vec![0.0, 0.0]);
        assert_eq!(m, vec![0.0, 0.0, 0.0]);
        let (j, m) = record_input(&dj, &drives, 2, 2, 3);
        assert_eq!(j, vec![2.0, 3.0]);
        assert_eq!(m, vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_drive_from_ground_stays_ground() {
        let p = PhysParams::default();
        let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 10, 20);
        let noise = NoiseGrid::generate(1, 200, 1e-3);
        let tr = rollout(
            &QubitState::ground(),
            &Controller::Constant(0.0),
            &noise,
            &cfg,
            &p,
            DriveMode::PerCheckpoint,
        )
        .unwrap();
        assert!(tr.validate(Some(20)).is_ok());
        for s in &tr.states {
            assert!((fidelity(s, &QubitState::ground()) - 1.0).abs() < 1e-12);
        }
        assert_eq!(tr.dj.len(), 200);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = PhysParams::default();
        let cfg = SolverConfig::new(Scheme::EulerHeun, 1e-3, 5, 10);
        let net = Controller::State(MlpParams::init(&[4, 8, 1], Head::Softsign { scale: 10.0 }, 0).unwrap());
        let psi = state_from_angles(BlochAngles::new(2.0, 1.0));
        let noise = NoiseGrid::for_trajectory(9, 3, 50, 1e-3);
        let a = rollout(&psi, &net, &noise, &cfg, &p, DriveMode::PerSubstep).unwrap();
        let b = rollout(&psi, &net, &noise, &cfg, &p, DriveMode::PerSubstep).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn record_controller_runs() {
        let p = PhysParams::default();
        let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 4, 10);
        let net = Controller::Current(CurrentNetParams::init(&[10, 6], &[1, 4], &[10, 1], 10.0, 1).unwrap());
        let noise = NoiseGrid::generate(2, 40, 1e-3);
        let tr = rollout(&QubitState::ground(), &net, &noise, &cfg, &p, DriveMode::PerCheckpoint).unwrap();
        assert_eq!(tr.drives.len(), 5);
        assert_eq!(tr.drives[0], 0.0);
        assert!(rollout(&QubitState::ground(), &net, &noise, &cfg, &p, DriveMode::PerSubstep).is_err());
    }

    #[test]
    fn ode_rollout_keeps_norm() {
        let p = PhysParams::default().closed();
        let psi = state_from_angles(BlochAngles::new(2.5, 0.3));
        let net = Controller::State(MlpParams::init(&[4, 16, 1], Head::Softsign { scale: 10.0 }, 4).unwrap());
        let tr = rollout_ode(&psi, &net, 30, 3.0, &p, 1e-8).unwrap();
        for s in &tr.states {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
        }
    }
}
