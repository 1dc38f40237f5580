//! Drift and diffusion of the homodyne-monitored qubit in Itô form,
//!
//! ```text
//! d psi = K(psi) dt + M(psi) dW
//! K = ( -i H + kappa/2 { <sx> s- - s+ s- - <sx>^2 / 4 } ) psi
//! M = sqrt(kappa) ( s- - <sx>/2 ) psi
//! H = Delta/2 sz + Omega/2 sx
//! ```
//!
//! together with the Itô-Stratonovich correction `C = 1/2 (M . grad) M` and
//! the analytic directional derivatives of all three maps. Off the unit
//! sphere `<sx>` is extended as the raw bilinear form `psi^dag sx psi`; every
//! derivative below is taken of that extension.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::state::{QubitState, Vec4};

/// Physical constants, all in units where time is measured in `1/kappa_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Detuning.
    pub delta: f64,
    /// Decay rate of the monitored channel.
    pub kappa: f64,
    /// Drive bound.
    pub omega_max: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            delta: 20.0,
            kappa: 1.0,
            omega_max: 10.0,
        }
    }
}

impl PhysParams {
    pub fn new(delta: f64, kappa: f64, omega_max: f64) -> Self {
        Self {
            delta,
            kappa,
            omega_max,
        }
    }

    /// The same qubit without the monitored decay channel.
    pub fn closed(&self) -> Self {
        Self { kappa: 0.0, ..*self }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.kappa >= 0.0) || !(self.omega_max >= 0.0) || !self.delta.is_finite() {
            return Err(crate::Error::Config(format!("invalid physical parameters {self:?}")));
        }
        Ok(())
    }
}

#[inline]
fn split(v: &Vec4) -> (C64, C64) {
    (C64::new(v[0], v[1]), C64::new(v[2], v[3]))
}

#[inline]
fn join(e: C64, g: C64) -> Vec4 {
    [e.re, e.im, g.re, g.im]
}

/// Symmetric bilinear form `s(u, v) = Re(u^dag sx v)`; `s(psi, psi) = <sx>`.
#[inline]
fn sx_form(u: &Vec4, v: &Vec4) -> f64 {
    u[0] * v[2] + u[1] * v[3] + u[2] * v[0] + u[3] * v[1]
}

#[inline]
fn axpy(a: f64, x: &Vec4, y: &Vec4) -> Vec4 {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2], a * x[3] + y[3]]
}

/// `-i H v` for the drive `omega`.
#[inline]
fn minus_i_h(v: &Vec4, omega: f64, p: &PhysParams) -> (C64, C64) {
    let (e, g) = split(v);
    let i = C64::i();
    let he = 0.5 * p.delta * e + 0.5 * omega * g;
    let hg = -0.5 * p.delta * g + 0.5 * omega * e;
    (-i * he, -i * hg)
}

/// Drift `K(psi, omega)`.
pub fn drift(psi: &Vec4, omega: f64, p: &PhysParams) -> Vec4 {
    let (e, g) = split(psi);
    let (he, hg) = minus_i_h(psi, omega, p);
    let s = sx_form(psi, psi);
    let k2 = 0.5 * p.kappa;
    // sigma_- (e, g) = (0, e); sigma_+ sigma_- (e, g) = (e, 0)
    let de = he + k2 * (-e - 0.25 * s * s * e);
    let dg = hg + k2 * (s * e - 0.25 * s * s * g);
    join(de, dg)
}

/// Directional derivative of the drift along `v` at fixed drive.
pub fn drift_jvp(psi: &Vec4, omega: f64, v: &Vec4, p: &PhysParams) -> Vec4 {
    let (e, g) = split(psi);
    let (ve, vg) = split(v);
    let (he, hg) = minus_i_h(v, omega, p);
    let s = sx_form(psi, psi);
    let ds = 2.0 * sx_form(psi, v);
    let k2 = 0.5 * p.kappa;
    let de = he + k2 * (-ve - 0.25 * (2.0 * s * ds * e + s * s * ve));
    let dg = hg + k2 * (ds * e + s * ve - 0.25 * (2.0 * s * ds * g + s * s * vg));
    join(de, dg)
}

/// Partial derivative of the drift with respect to the drive, `-i/2 sx psi`.
pub fn drift_domega(psi: &Vec4) -> Vec4 {
    // -i/2 (g, e)
    [0.5 * psi[3], -0.5 * psi[2], 0.5 * psi[1], -0.5 * psi[0]]
}

/// Diffusion `M(psi)`.
pub fn diffusion(psi: &Vec4, p: &PhysParams) -> Vec4 {
    let sk = p.kappa.sqrt();
    let s = sx_form(psi, psi);
    // sqrt(k) ((0, e) - s/2 (e, g))
    [
        -0.5 * sk * s * psi[0],
        -0.5 * sk * s * psi[1],
        sk * (psi[0] - 0.5 * s * psi[2]),
        sk * (psi[1] - 0.5 * s * psi[3]),
    ]
}

/// `DM[v] = sqrt(k) (s- v - s(psi, v) psi - s(psi, psi)/2 v)`.
pub fn diffusion_jvp(psi: &Vec4, v: &Vec4, p: &PhysParams) -> Vec4 {
    let sk = p.kappa.sqrt();
    let s = sx_form(psi, psi);
    let c = sx_form(psi, v);
    [
        sk * (-c * psi[0] - 0.5 * s * v[0]),
        sk * (-c * psi[1] - 0.5 * s * v[1]),
        sk * (v[0] - c * psi[2] - 0.5 * s * v[2]),
        sk * (v[1] - c * psi[3] - 0.5 * s * v[3]),
    ]
}

/// Second derivative `D^2 M[u, v] = -sqrt(k) (s(u,v) psi + s(psi,v) u + s(psi,u) v)`.
fn diffusion_hvp(psi: &Vec4, u: &Vec4, v: &Vec4, p: &PhysParams) -> Vec4 {
    let sk = p.kappa.sqrt();
    let a = sx_form(u, v);
    let b = sx_form(psi, v);
    let c = sx_form(psi, u);
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = -sk * (a * psi[k] + b * u[k] + c * v[k]);
    }
    out
}

/// Itô-Stratonovich correction `C = 1/2 DM[M]`.
pub fn ito_strat_correction(psi: &Vec4, p: &PhysParams) -> Vec4 {
    let m = diffusion(psi, p);
    let dm = diffusion_jvp(psi, &m, p);
    [0.5 * dm[0], 0.5 * dm[1], 0.5 * dm[2], 0.5 * dm[3]]
}

/// `DC[v] = 1/2 (D^2 M[M, v] + DM[DM[v]])`.
pub fn ito_strat_correction_jvp(psi: &Vec4, v: &Vec4, p: &PhysParams) -> Vec4 {
    let m = diffusion(psi, p);
    let a = diffusion_hvp(psi, &m, v, p);
    let dmv = diffusion_jvp(psi, v, p);
    let b = diffusion_jvp(psi, &dmv, p);
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
        0.5 * (a[3] + b[3]),
    ]
}

/// Stratonovich drift `K - C`.
pub fn strat_drift(psi: &Vec4, omega: f64, p: &PhysParams) -> Vec4 {
    let k = drift(psi, omega, p);
    let c = ito_strat_correction(psi, p);
    axpy(-1.0, &c, &k)
}

pub fn strat_drift_jvp(psi: &Vec4, omega: f64, v: &Vec4, p: &PhysParams) -> Vec4 {
    let k = drift_jvp(psi, omega, v, p);
    let c = ito_strat_correction_jvp(psi, v, p);
    axpy(-1.0, &c, &k)
}

/// Drift of the reverse-time Itô equation, `K - 2C`.
pub fn reverse_drift(psi: &Vec4, omega: f64, p: &PhysParams) -> Vec4 {
    let k = drift(psi, omega, p);
    let c = ito_strat_correction(psi, p);
    axpy(-2.0, &c, &k)
}

const BASIS: [Vec4; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Vector-Jacobian product `a^T (d f / d psi)` assembled from four directional derivatives.
pub fn vjp(a: &Vec4, jvp: impl Fn(&Vec4) -> Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for (k, e) in BASIS.iter().enumerate() {
        let col = jvp(e);
        out[k] = a[0] * col[0] + a[1] * col[1] + a[2] * col[2] + a[3] * col[3];
    }
    out
}

/// Convenience wrappers taking a [`QubitState`].
pub fn drift_k(psi: &QubitState, omega: f64, p: &PhysParams) -> Vec4 {
    drift(&psi.as_array(), omega, p)
}

pub fn diffusion_m(psi: &QubitState, p: &PhysParams) -> Vec4 {
    diffusion(&psi.as_array(), p)
}
