//! Reverse-time reconstruction of a forward path on its own noise grid.
//!
//! Stepping from `t_{k+1}` back to `t_k` with the forward increment
//! `dW_k = W(t_{k+1}) - W(t_k)`:
//!
//! * Itô form: `psi_k = psi_{k+1} - (K - 2C) dt - M dW_k + C (dW_k^2 - dt)`
//! * Stratonovich form: Euler-Heun on `psi_k = psi_{k+1} - (K - C) dt - M o dW_k`
//!
//! with every coefficient evaluated at the later state.

use crate::error::{Error, Result};
use crate::quantum::{
    diffusion, ito_strat_correction, norm_sqr, renormalize_raw, reverse_drift, strat_drift, PhysParams, QubitState,
    Vec4,
};

use super::noise::NoiseGrid;
use super::stepper::{Scheme, SolverConfig};

/// Maximum tolerated deviation of the pre-normalization norm from one.
pub const REVERSE_NORM_LIMIT: f64 = 0.5;

pub(crate) fn reverse_unnormalized(
    scheme: Scheme,
    psi: &Vec4,
    dt: f64,
    dw: f64,
    p: &PhysParams,
    omega_at: &mut dyn FnMut(&Vec4) -> f64,
) -> Vec4 {
    let mut y = *psi;
    match scheme {
        Scheme::RkMilstein => {
            let f = reverse_drift(psi, omega_at(psi), p);
            let m = diffusion(psi, p);
            let c = ito_strat_correction(psi, p);
            let q = dw * dw - dt;
            for k in 0..4 {
                y[k] += -f[k] * dt - m[k] * dw + c[k] * q;
            }
        }
        Scheme::EulerHeun => {
            let f0 = strat_drift(psi, omega_at(psi), p);
            let g0 = diffusion(psi, p);
            let mut bar = *psi;
            for k in 0..4 {
                bar[k] -= f0[k] * dt + g0[k] * dw;
            }
            let f1 = strat_drift(&bar, omega_at(&bar), p);
            let g1 = diffusion(&bar, p);
            for k in 0..4 {
                y[k] -= 0.5 * (f0[k] + f1[k]) * dt + 0.5 * (g0[k] + g1[k]) * dw;
            }
        }
    }
    y
}

/// One renormalized reverse substep; `t` is only used for diagnostics.
pub(crate) fn reverse_step_with(
    scheme: Scheme,
    psi: &Vec4,
    dt: f64,
    dw: f64,
    p: &PhysParams,
    t: f64,
    omega_at: &mut dyn FnMut(&Vec4) -> f64,
) -> Result<Vec4> {
    let y = reverse_unnormalized(scheme, psi, dt, dw, p, omega_at);
    let n = norm_sqr(&y).sqrt();
    if !((n - 1.0).abs() <= REVERSE_NORM_LIMIT) {
        return Err(Error::DivergedReverse { t, norm: n });
    }
    renormalize_raw(&y)
}

/// Reconstructs the forward path backwards from `psi_end`.
///
/// `drives` has `N + 1` entries and interval `i` is integrated with
/// `drives[i + 1]`. When `checkpoints` is given the reconstruction is reset to
/// the stored checkpoint state at the end of every interval. Returns all
/// `N * N_sub + 1` substep states in forward time order.
pub fn integrate_reverse(
    psi_end: &QubitState,
    drives: &[f64],
    noise: &NoiseGrid,
    cfg: &SolverConfig,
    p: &PhysParams,
    checkpoints: Option<&[QubitState]>,
) -> Result<Vec<QubitState>> {
    let n = cfg.n_checkpoints;
    if drives.len() != n + 1 || noise.len() < n * cfg.n_sub {
        return Err(Error::InconsistentTrajectory(format!(
            "reverse pass over {n} intervals with {} drives and {} increments",
            drives.len(),
            noise.len()
        )));
    }
    if let Some(c) = checkpoints {
        if c.len() != n + 1 {
            return Err(Error::InconsistentTrajectory(format!(
                "{} checkpoints for {n} intervals",
                c.len()
            )));
        }
    }
    let total = n * cfg.n_sub;
    let mut out = vec![QubitState::ground(); total + 1];
    let mut v = psi_end.as_array();
    out[total] = *psi_end;
    for i in (0..n).rev() {
        if let Some(c) = checkpoints {
            v = c[i + 1].as_array();
            out[(i + 1) * cfg.n_sub] = c[i + 1];
        }
        let om = drives[i + 1];
        for k in (0..cfg.n_sub).rev() {
            let idx = i * cfg.n_sub + k;
            let t = (idx + 1) as f64 * cfg.dt;
            v = reverse_step_with(cfg.scheme, &v, cfg.dt, noise.increments[idx], p, t, &mut |_| om)?;
            out[idx] = QubitState::from_array(v);
        }
    }
    if let Some(c) = checkpoints {
        out[0] = c[0];
    }
    Ok(out)
}
