//! Fixed-step integrators for the monitored-qubit SDE.
//!
//! Both schemes renormalize after every substep; the renormalization is part
//! of the discrete dynamics and is differentiated by [`step_jvp`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{
    diffusion, diffusion_jvp, drift, drift_domega, drift_jvp, expect_pauli_raw, homodyne_increment, renormalize_jvp,
    renormalize_raw, strat_drift, strat_drift_jvp, Axis, PhysParams, QubitState, Vec4,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Stratonovich Euler-Heun on the converted drift `K - C`.
    EulerHeun,
    /// Derivative-free (Runge-Kutta) Milstein on the Itô form.
    RkMilstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Substep length in units of `1/kappa`.
    pub dt: f64,
    /// Number of checkpoint intervals `N`.
    pub n_checkpoints: usize,
    /// Substeps per checkpoint interval.
    pub n_sub: usize,
}

impl SolverConfig {
    pub fn new(scheme: Scheme, dt: f64, n_checkpoints: usize, n_sub: usize) -> Self {
        Self {
            scheme,
            dt,
            n_checkpoints,
            n_sub,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.n_sub == 0 {
            return Err(Error::Config(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.n_checkpoints * self.n_sub
    }

    /// Length of one checkpoint interval.
    pub fn interval(&self) -> f64 {
        self.n_sub as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.total_steps() as f64 * self.dt
    }

    pub fn checkpoint_time(&self, i: usize) -> f64 {
        (i * self.n_sub) as f64 * self.dt
    }
}

#[inline]
fn lin(terms: &[(f64, &Vec4)], base: &Vec4) -> Vec4 {
    let mut out = *base;
    for (a, v) in terms {
        for k in 0..4 {
            out[k] += a * v[k];
        }
    }
    out
}

/// Unnormalized Milstein update:
/// `psi + K dt + M dW + (M(psi_bar) - M(psi)) (dW^2 - dt) / (2 sqrt(dt))`
/// with predictor `psi_bar = psi + K dt + M sqrt(dt)`.
pub(crate) fn milstein_raw(psi: &Vec4, omega: f64, dt: f64, dw: f64, p: &PhysParams) -> Vec4 {
    let sdt = dt.sqrt();
    let k = drift(psi, omega, p);
    let m = diffusion(psi, p);
    let bar = lin(&[(dt, &k), (sdt, &m)], psi);
    let mb = diffusion(&bar, p);
    let c = (dw * dw - dt) / (2.0 * sdt);
    let mut out = lin(&[(dt, &k), (dw, &m)], psi);
    for j in 0..4 {
        out[j] += c * (mb[j] - m[j]);
    }
    out
}

/// Unnormalized Euler-Heun update on the Stratonovich form; the drive is
/// re-evaluated at the predictor, so a state-dependent controller sits inside
/// the drift.
pub(crate) fn heun_raw(psi: &Vec4, dt: f64, dw: f64, p: &PhysParams, omega_at: &mut dyn FnMut(&Vec4) -> f64) -> Vec4 {
    let f0 = strat_drift(psi, omega_at(psi), p);
    let g0 = diffusion(psi, p);
    let bar = lin(&[(dt, &f0), (dw, &g0)], psi);
    let f1 = strat_drift(&bar, omega_at(&bar), p);
    let g1 = diffusion(&bar, p);
    lin(
        &[(0.5 * dt, &f0), (0.5 * dt, &f1), (0.5 * dw, &g0), (0.5 * dw, &g1)],
        psi,
    )
}

/// One substep without the final renormalization.
pub(crate) fn step_unnormalized(
    scheme: Scheme,
    psi: &Vec4,
    dt: f64,
    dw: f64,
    p: &PhysParams,
    omega_at: &mut dyn FnMut(&Vec4) -> f64,
) -> Vec4 {
    match scheme {
        Scheme::RkMilstein => milstein_raw(psi, omega_at(psi), dt, dw, p),
        Scheme::EulerHeun => heun_raw(psi, dt, dw, p, omega_at),
    }
}

/// One renormalized substep with a state-dependent drive.
pub(crate) fn step_with(
    scheme: Scheme,
    psi: &Vec4,
    dt: f64,
    dw: f64,
    p: &PhysParams,
    omega_at: &mut dyn FnMut(&Vec4) -> f64,
) -> Result<Vec4> {
    renormalize_raw(&step_unnormalized(scheme, psi, dt, dw, p, omega_at))
}

pub(crate) fn step_const(scheme: Scheme, psi: &Vec4, omega: f64, dt: f64, dw: f64, p: &PhysParams) -> Result<Vec4> {
    step_with(scheme, psi, dt, dw, p, &mut |_| omega)
}

pub fn step_milstein(psi: &QubitState, omega: f64, dt: f64, dw: f64, p: &PhysParams) -> Result<QubitState> {
    renormalize_raw(&milstein_raw(&psi.as_array(), omega, dt, dw, p)).map(QubitState::from_array)
}

pub fn step_euler_heun(psi: &QubitState, omega: f64, dt: f64, dw: f64, p: &PhysParams) -> Result<QubitState> {
    renormalize_raw(&heun_raw(&psi.as_array(), dt, dw, p, &mut |_| omega)).map(QubitState::from_array)
}

/// One substep at constant drive together with its tangent map.
///
/// Each entry of `tangents` is a perturbation `(d psi, d omega)`; on return the
/// `d psi` part holds the perturbation of the renormalized output.
pub(crate) fn step_jvp(
    scheme: Scheme,
    psi: &Vec4,
    omega: f64,
    dt: f64,
    dw: f64,
    p: &PhysParams,
    tangents: &mut [(Vec4, f64)],
) -> Result<Vec4> {
    let y = match scheme {
        Scheme::RkMilstein => {
            let sdt = dt.sqrt();
            let k = drift(psi, omega, p);
            let m = diffusion(psi, p);
            let k_om = drift_domega(psi);
            let bar = lin(&[(dt, &k), (sdt, &m)], psi);
            let mb = diffusion(&bar, p);
            let c = (dw * dw - dt) / (2.0 * sdt);
            let mut y = lin(&[(dt, &k), (dw, &m)], psi);
            for j in 0..4 {
                y[j] += c * (mb[j] - m[j]);
            }
            for (dpsi, dom) in tangents.iter_mut() {
                let dk = lin(&[(*dom, &k_om)], &drift_jvp(psi, omega, dpsi, p));
                let dm = diffusion_jvp(psi, dpsi, p);
                let dbar = lin(&[(dt, &dk), (sdt, &dm)], dpsi);
                let dmb = diffusion_jvp(&bar, &dbar, p);
                let mut dy = lin(&[(dt, &dk), (dw, &dm)], dpsi);
                for j in 0..4 {
                    dy[j] += c * (dmb[j] - dm[j]);
                }
                *dpsi = renormalize_jvp(&y, &dy);
            }
            y
        }
        Scheme::EulerHeun => {
            let f0 = strat_drift(psi, omega, p);
            let g0 = diffusion(psi, p);
            let k_om0 = drift_domega(psi);
            let bar = lin(&[(dt, &f0), (dw, &g0)], psi);
            let f1 = strat_drift(&bar, omega, p);
            let g1 = diffusion(&bar, p);
            let k_om1 = drift_domega(&bar);
            let y = lin(
                &[(0.5 * dt, &f0), (0.5 * dt, &f1), (0.5 * dw, &g0), (0.5 * dw, &g1)],
                psi,
            );
            for (dpsi, dom) in tangents.iter_mut() {
                let df0 = lin(&[(*dom, &k_om0)], &strat_drift_jvp(psi, omega, dpsi, p));
                let dg0 = diffusion_jvp(psi, dpsi, p);
                let dbar = lin(&[(dt, &df0), (dw, &dg0)], dpsi);
                let df1 = lin(&[(*dom, &k_om1)], &strat_drift_jvp(&bar, omega, &dbar, p));
                let dg1 = diffusion_jvp(&bar, &dbar, p);
                let dy = lin(
                    &[(0.5 * dt, &df0), (0.5 * dt, &df1), (0.5 * dw, &dg0), (0.5 * dw, &dg1)],
                    dpsi,
                );
                *dpsi = renormalize_jvp(&y, &dy);
            }
            y
        }
    };
    renormalize_raw(&y)
}

/// Integrates one checkpoint interval at constant drive.
pub fn integrate_interval(
    psi: &QubitState,
    omega: f64,
    noise_slice: &[f64],
    cfg: &SolverConfig,
    p: &PhysParams,
) -> Result<QubitState> {
    let mut v = psi.as_array();
    for &dw in noise_slice {
        v = step_const(cfg.scheme, &v, omega, cfg.dt, dw, p)?;
    }
    Ok(QubitState::from_array(v))
}

/// As [`integrate_interval`], also returning the homodyne increment of every
/// substep (signal evaluated at the state entering the substep).
pub fn integrate_interval_recorded(
    psi: &QubitState,
    omega: f64,
    noise_slice: &[f64],
    cfg: &SolverConfig,
    p: &PhysParams,
) -> Result<(QubitState, Vec<f64>)> {
    let mut v = psi.as_array();
    let mut record = Vec::with_capacity(noise_slice.len());
    for &dw in noise_slice {
        record.push(homodyne_increment(expect_pauli_raw(&v, Axis::X), cfg.dt, dw, p.kappa));
        v = step_const(cfg.scheme, &v, omega, cfg.dt, dw, p)?;
    }
    Ok((QubitState::from_array(v), record))
}
