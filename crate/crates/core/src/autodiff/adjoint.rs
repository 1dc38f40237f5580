//! Continuous adjoint methods: the augmented reverse SDE for monitored
//! trajectories and the interpolating adjoint ODE for the closed system.

use serde::{Deserialize, Serialize};

use crate::controller::{Controller, MlpCache, MlpParams};
use crate::error::{Error, Result};
use crate::quantum::{
    diffusion, diffusion_jvp, drift_domega, drift_jvp, norm_sqr, renormalize_raw, strat_drift, strat_drift_jvp, vjp,
    PhysParams, QubitState, Vec4,
};
use crate::sde::{NoiseGrid, Rk54, SolverConfig, TrajectoryRecord, REVERSE_NORM_LIMIT};

use super::LossGrads;

/// Augmented reverse-pass state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    /// Reconstructed state.
    pub psi: QubitState,
    /// Loss sensitivity w.r.t. the state.
    pub a_psi: Vec4,
    /// Accumulated parameter gradient.
    pub a_theta: Vec<f64>,
}

/// How the drive depends on the state during the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointDrive {
    /// The controller is evaluated at every point of the path.
    Continuous,
    /// The controller is evaluated at checkpoints and its output held.
    PiecewiseConstant,
}

#[inline]
fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
fn axpy4(a: f64, x: &Vec4, y: &Vec4) -> Vec4 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2], y[3] + a * x[3]]
}

fn state_net(ctrl: &Controller) -> Result<Option<&MlpParams>> {
    match ctrl {
        Controller::State(n) => Ok(Some(n)),
        Controller::Handcrafted { .. } | Controller::Constant(_) => Ok(None),
        Controller::Current(_) => Err(Error::Config(
            "continuous adjoints need a state-aware controller".into(),
        )),
    }
}

/// Drive at `v`, with the forward cache when the controller is a network.
fn drive_at(ctrl: &Controller, net: Option<&MlpParams>, v: &Vec4) -> Result<(f64, Option<MlpCache>)> {
    match net {
        Some(n) => {
            let (out, cache) = n.forward(v)?;
            Ok((out[0], Some(cache)))
        }
        None => Ok((ctrl.drive_for_state(v)?, None)),
    }
}

/// Adds `w * d drive / d theta` into `theta` and returns `w * d drive / d psi`.
fn pull_drive(net: Option<&MlpParams>, cache: &Option<MlpCache>, w: f64, theta: &mut [f64]) -> Result<Vec4> {
    match (net, cache) {
        (Some(n), Some(c)) if w != 0.0 => {
            let dx = n.backward(c, &[w], Some(theta))?;
            Ok([dx[0], dx[1], dx[2], dx[3]])
        }
        _ => Ok([0.0; 4]),
    }
}

struct Point {
    f: Vec4,
    g: Vec4,
    a_df: Vec4,
    a_dg: Vec4,
    /// `a . dK/d omega`.
    c: f64,
}

/// Drift, diffusion and their pullbacks at `(v, a)`. In continuous mode
/// `w * c * d drive/d theta` is added into `theta` and the controller's input
/// path is included in `a_df`.
#[allow(clippy::too_many_arguments)]
fn point(
    ctrl: &Controller,
    net: Option<&MlpParams>,
    v: &Vec4,
    a: &Vec4,
    held: Option<f64>,
    w: f64,
    theta: &mut [f64],
    p: &PhysParams,
) -> Result<Point> {
    let (om, cache) = match held {
        Some(om) => (om, None),
        None => drive_at(ctrl, net, v)?,
    };
    let f = strat_drift(v, om, p);
    let g = diffusion(v, p);
    let c = dot4(a, &drift_domega(v));
    let mut a_df = vjp(a, |e| strat_drift_jvp(v, om, e, p));
    let a_dg = vjp(a, |e| diffusion_jvp(v, e, p));
    if held.is_none() {
        let dx = pull_drive(net, &cache, w * c, theta)?;
        for k in 0..4 {
            a_df[k] += dx[k] / w;
        }
    }
    Ok(Point { f, g, a_df, a_dg, c })
}

/// Gradient of the loss w.r.t. the controller parameters by integrating the
/// augmented system backwards on the forward noise grid.
///
/// Every substep is a reverse Euler-Heun step of the Stratonovich system
/// `(psi, a_psi, a_theta)`; `a_psi` is first projected onto the tangent space
/// of the sphere, mirroring the renormalization of the forward pass. At every
/// checkpoint `psi` is reset to the stored state and the loss gradient is
/// added to `a_psi`.
pub fn adjoint_sde_backward(
    traj: &TrajectoryRecord,
    noise: &NoiseGrid,
    ctrl: &Controller,
    grads: &LossGrads,
    p: &PhysParams,
    cfg: &SolverConfig,
    mode: AdjointDrive,
) -> Result<AdjointState> {
    let n = traj.n_checkpoints();
    traj.validate(None)?;
    if n != cfg.n_checkpoints || noise.len() < cfg.total_steps() {
        return Err(Error::InconsistentTrajectory(format!(
            "{n} checkpoints and {} increments for {:?}",
            noise.len(),
            cfg
        )));
    }
    if grads.d_states.len() != n + 1 || grads.d_drives.len() != n + 1 {
        return Err(Error::InconsistentTrajectory(
            "loss gradients do not match the trajectory".into(),
        ));
    }
    let net = state_net(ctrl)?;
    let mut theta = vec![0.0; ctrl.n_params()];
    let dt = cfg.dt;
    let w = 0.5 * dt;

    let mut a = grads.d_states[n];
    if mode == AdjointDrive::Continuous {
        let (_, cache) = drive_at(ctrl, net, &traj.states[n].as_array())?;
        let dx = pull_drive(net, &cache, grads.d_drives[n], &mut theta)?;
        a = axpy4(1.0, &dx, &a);
    }
    for i in (0..n).rev() {
        let mut v = traj.states[i + 1].as_array();
        let held = match mode {
            AdjointDrive::PiecewiseConstant => Some(traj.drives[i + 1]),
            AdjointDrive::Continuous => None,
        };
        let mut s_omega = 0.0;
        for k in (0..cfg.n_sub).rev() {
            let idx = i * cfg.n_sub + k;
            let dw = noise.increments[idx];
            let r = dot4(&a, &v);
            a = axpy4(-r, &v, &a);

            let p0 = point(ctrl, net, &v, &a, held, w, &mut theta, p)?;
            let mut vb = v;
            let mut ab = a;
            for c in 0..4 {
                vb[c] -= p0.f[c] * dt + p0.g[c] * dw;
                ab[c] += p0.a_df[c] * dt + p0.a_dg[c] * dw;
            }
            let p1 = point(ctrl, net, &vb, &ab, held, w, &mut theta, p)?;
            let mut y = v;
            for c in 0..4 {
                y[c] -= 0.5 * (p0.f[c] + p1.f[c]) * dt + 0.5 * (p0.g[c] + p1.g[c]) * dw;
                a[c] += 0.5 * (p0.a_df[c] + p1.a_df[c]) * dt + 0.5 * (p0.a_dg[c] + p1.a_dg[c]) * dw;
            }
            s_omega += w * (p0.c + p1.c);
            let nrm = norm_sqr(&y).sqrt();
            if !((nrm - 1.0).abs() <= REVERSE_NORM_LIMIT) {
                return Err(Error::DivergedReverse {
                    t: idx as f64 * dt,
                    norm: nrm,
                });
            }
            v = renormalize_raw(&y)?;
        }
        let vi = traj.states[i].as_array();
        a = axpy4(1.0, &grads.d_states[i], &a);
        let w_drive = match mode {
            AdjointDrive::PiecewiseConstant => s_omega + grads.d_drives[i + 1],
            AdjointDrive::Continuous => grads.d_drives[i],
        };
        let (_, cache) = drive_at(ctrl, net, &vi)?;
        let dx = pull_drive(net, &cache, w_drive, &mut theta)?;
        a = axpy4(1.0, &dx, &a);
    }
    Ok(AdjointState {
        psi: traj.states[0],
        a_psi: a,
        a_theta: theta,
    })
}

/// Controller value and derivatives at one interpolation node.
struct Node {
    psi: Vec4,
    omega: f64,
    grad_psi: Vec4,
    grad_theta: Vec<f64>,
}

fn node(ctrl: &Controller, net: Option<&MlpParams>, v: Vec4) -> Result<Node> {
    let (omega, cache) = drive_at(ctrl, net, &v)?;
    let mut grad_theta = vec![0.0; ctrl.n_params()];
    let grad_psi = pull_drive(net, &cache, 1.0, &mut grad_theta)?;
    Ok(Node {
        psi: v,
        omega,
        grad_psi,
        grad_theta,
    })
}

/// `a . d f / d psi` for the closed-loop drift, and `a . dK/d omega`.
fn closed_pullback(nd: &Node, a: &Vec4, p: &PhysParams) -> (Vec4, f64) {
    let c = dot4(a, &drift_domega(&nd.psi));
    let mut out = vjp(a, |e| drift_jvp(&nd.psi, nd.omega, e, p));
    for k in 0..4 {
        out[k] += c * nd.grad_psi[k];
    }
    (out, c)
}

/// Interpolating adjoint for the closed system under continuous state
/// feedback.
///
/// For every checkpoint interval, latest first, the forward ODE is re-solved
/// from the stored checkpoint with the adaptive integrator; the adjoint is
/// then integrated backwards with classical Runge-Kutta over the same step
/// grid, reading states from the dense output.
pub fn adjoint_ode_backward(
    traj: &TrajectoryRecord,
    ctrl: &Controller,
    grads: &LossGrads,
    p: &PhysParams,
    tol: f64,
) -> Result<AdjointState> {
    adjoint_ode_backward_with(traj, ctrl, grads, p, tol, f64::INFINITY)
}

/// As [`adjoint_ode_backward`], splitting every solver step so that no
/// backward step exceeds `max_step`.
pub fn adjoint_ode_backward_with(
    traj: &TrajectoryRecord,
    ctrl: &Controller,
    grads: &LossGrads,
    p: &PhysParams,
    tol: f64,
    max_step: f64,
) -> Result<AdjointState> {
    let n = traj.n_checkpoints();
    traj.validate(None)?;
    if grads.d_states.len() != n + 1 || grads.d_drives.len() != n + 1 {
        return Err(Error::InconsistentTrajectory(
            "loss gradients do not match the trajectory".into(),
        ));
    }
    let net = state_net(ctrl)?;
    let mut theta = vec![0.0; ctrl.n_params()];
    let mut a = [0.0; 4];
    let mut rk = Rk54::new(tol);
    let mut h = 1e-2f64;
    let mut err = None;
    for i in (0..=n).rev() {
        // checkpoint contribution
        let nd = node(ctrl, net, traj.states[i].as_array())?;
        for k in 0..4 {
            a[k] += grads.d_states[i][k] + grads.d_drives[i] * nd.grad_psi[k];
        }
        for (t, g) in theta.iter_mut().zip(&nd.grad_theta) {
            *t += grads.d_drives[i] * g;
        }
        if i == 0 {
            break;
        }
        let (t0, t1) = (traj.times[i - 1], traj.times[i]);
        let mut f = |_t: f64, y: &Vec4| {
            let om = ctrl.drive_for_state(y).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            });
            crate::quantum::drift(y, om, p)
        };
        let (_, steps, next) = rk.integrate(&traj.states[i - 1].as_array(), t0, t1, h.min(t1 - t0), &mut f)?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        h = next;
        let mut right = node(ctrl, net, steps.last().map_or(traj.states[i].as_array(), |s| s.y1))?;
        for st in steps.iter().rev() {
            let pieces = (st.h / max_step).ceil().max(1.0) as usize;
            let hh = st.h / pieces as f64;
            for q in (0..pieces).rev() {
                let tl = st.t0 + q as f64 * hh;
                let mid = node(ctrl, net, st.interpolate(tl + 0.5 * hh))?;
                let left = node(ctrl, net, if q == 0 { st.y0 } else { st.interpolate(tl) })?;
                let (k1, c1) = closed_pullback(&right, &a, p);
                let (k2, c2) = closed_pullback(&mid, &axpy4(0.5 * hh, &k1, &a), p);
                let (k3, c3) = closed_pullback(&mid, &axpy4(0.5 * hh, &k2, &a), p);
                let (k4, c4) = closed_pullback(&left, &axpy4(hh, &k3, &a), p);
                for k in 0..4 {
                    a[k] += hh / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
                }
                let (w1, wm, w0) = (hh / 6.0 * c1, hh / 3.0 * (c2 + c3), hh / 6.0 * c4);
                for (j, t) in theta.iter_mut().enumerate() {
                    *t += w1 * right.grad_theta[j] + wm * mid.grad_theta[j] + w0 * left.grad_theta[j];
                }
                right = left;
            }
        }
    }
    Ok(AdjointState {
        psi: traj.states[0],
        a_psi: a,
        a_theta: theta,
    })
}
