use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real 4-vector in the fixed state layout `(re_e, im_e, re_g, im_g)`.
///
/// Tangents, adjoints and Jacobian columns all use this same ordering.
pub type Vec4 = [f64; 4];

/// Norms below this value are treated as a collapsed state.
pub const ZERO_NORM: f64 = 1e-300;

/// Pure qubit state `c_e |e> + c_g |g>` stored as four reals.
///
/// Layout is `(re_e, im_e, re_g, im_g)`; no global-phase gauge is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub re_e: f64,
    pub im_e: f64,
    pub re_g: f64,
    pub im_g: f64,
}

impl QubitState {
    pub const fn new(re_e: f64, im_e: f64, re_g: f64, im_g: f64) -> Self {
        Self { re_e, im_e, re_g, im_g }
    }

    /// The excited state `|e>`.
    pub const fn excited() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// The ground state `|g>`.
    pub const fn ground() -> Self {
        Self::new(0.0, 0.0, 1.0, 0.0)
    }

    pub fn from_array(v: Vec4) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(&self) -> Vec4 {
        [self.re_e, self.im_e, self.re_g, self.im_g]
    }

    pub fn from_amplitudes(e: Complex64, g: Complex64) -> Self {
        Self::new(e.re, e.im, g.re, g.im)
    }

    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.re_e, self.im_e),
            Complex64::new(self.re_g, self.im_g),
        )
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.as_array())
    }

    /// Multiplies the state by the global phase `e^{i alpha}`.
    pub fn with_phase(&self, alpha: f64) -> Self {
        let (e, g) = self.amplitudes();
        let ph = Complex64::from_polar(1.0, alpha);
        Self::from_amplitudes(e * ph, g * ph)
    }

    pub fn renormalize(&self) -> Result<Self> {
        renormalize(self)
    }
}

/// Spherical Bloch coordinates: `theta` in `[0, pi]`, `phi` in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Recovers the Bloch angles of a normalized pure state.
    pub fn of_state(psi: &QubitState) -> Self {
        let z = expect_pauli(psi, Axis::Z).clamp(-1.0, 1.0);
        let x = expect_pauli(psi, Axis::X);
        let y = expect_pauli(psi, Axis::Y);
        let theta = z.acos();
        let mut phi = y.atan2(x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi -= 2.0 * PI;
        }
        Self { theta, phi }
    }
}

/// Polar coordinates of the stereographic image, radius truncated to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoPoint {
    pub r: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub(crate) fn norm_sqr(v: &Vec4) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn dot(a: &Vec4, b: &Vec4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Expectation value of a Pauli operator, evaluated as the raw bilinear form
/// `psi^dag sigma psi` (equal to the expectation for normalized input).
pub fn expect_pauli(psi: &QubitState, axis: Axis) -> f64 {
    expect_pauli_raw(&psi.as_array(), axis)
}

pub(crate) fn expect_pauli_raw(v: &Vec4, axis: Axis) -> f64 {
    let [re, ie, rg, ig] = *v;
    match axis {
        // 2 Re(conj(e) g)
        Axis::X => 2.0 * (re * rg + ie * ig),
        // 2 Im(conj(e) g)
        Axis::Y => 2.0 * (re * ig - ie * rg),
        Axis::Z => re * re + ie * ie - rg * rg - ig * ig,
    }
}

/// `|<psi|target>|^2`.
pub fn fidelity(psi: &QubitState, target: &QubitState) -> f64 {
    let (pe, pg) = psi.amplitudes();
    let (te, tg) = target.amplitudes();
    (pe.conj() * te + pg.conj() * tg).norm_sqr()
}

/// Gradient of `fidelity(psi, target)` with respect to the real layout of `psi`.
pub fn fidelity_grad(psi: &QubitState, target: &QubitState) -> Vec4 {
    let (pe, pg) = psi.amplitudes();
    let (te, tg) = target.amplitudes();
    // F = |z|^2 with z = conj(te) pe + conj(tg) pg (same modulus as <psi|target>).
    let z = te.conj() * pe + tg.conj() * pg;
    // dF = 2 Re(conj(z) dz); dz/d(re pe) = conj(te), dz/d(im pe) = i conj(te).
    let a = z.conj() * te.conj();
    let b = z.conj() * tg.conj();
    [2.0 * a.re, -2.0 * a.im, 2.0 * b.re, -2.0 * b.im]
}

pub fn renormalize(psi: &QubitState) -> Result<QubitState> {
    renormalize_raw(&psi.as_array()).map(QubitState::from_array)
}

pub(crate) fn renormalize_raw(v: &Vec4) -> Result<Vec4> {
    let n = norm_sqr(v).sqrt();
    if !(n >= ZERO_NORM) {
        return Err(Error::ZeroNorm(n));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n, v[3] / n])
}

/// Tangent map of `v -> v / |v|`: `(dv - v_hat (v_hat . dv)) / |v|`.
pub(crate) fn renormalize_jvp(v: &Vec4, dv: &Vec4) -> Vec4 {
    let n = norm_sqr(v).sqrt();
    let h = [v[0] / n, v[1] / n, v[2] / n, v[3] / n];
    let p = dot(&h, dv);
    [
        (dv[0] - h[0] * p) / n,
        (dv[1] - h[1] * p) / n,
        (dv[2] - h[2] * p) / n,
        (dv[3] - h[3] * p) / n,
    ]
}

/// `cos(theta/2)|e> + sin(theta/2) e^{i phi}|g>`.
pub fn state_from_angles(a: BlochAngles) -> QubitState {
    let (s, c) = (0.5 * a.theta).sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    QubitState::new(c, 0.0, s * cp, s * sp)
}

/// `(R, Phi) = (cot(theta/2), phi)` with `R` truncated to `[0, 1]`.
pub fn stereographic(a: BlochAngles) -> StereoPoint {
    StereoPoint {
        r: stereographic_radius(a.theta).clamp(0.0, 1.0),
        phi: a.phi,
    }
}

/// Untruncated stereographic radius `cot(theta/2)`; infinite at the north pole.
pub fn stereographic_radius(theta: f64) -> f64 {
    let half = 0.5 * theta;
    if half.sin() == 0.0 {
        return f64::INFINITY;
    }
    half.cos() / half.sin()
}

/// One homodyne increment `kappa <sx> dt + sqrt(kappa) dW`.
pub fn homodyne_increment(sx: f64, dt: f64, dw: f64, kappa: f64) -> f64 {
    kappa * sx * dt + kappa.sqrt() * dw
}
