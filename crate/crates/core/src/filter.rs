//! Closed-form filter for the monitored qubit.
//!
//! The conditioned state is a linear functional of the initial state,
//! `rho_t = D rho_0 D^dag / tr[D rho_0 D^dag]`, with `D` the time-ordered
//! product of `exp(G dt)` and, in the `(e, g)` basis,
//!
//! ```text
//! G = -i H - kappa/2 s+ s- + J s-
//!   = [[ -i Delta/2 - kappa/2 , -i Omega/2 ],
//!      [ -i Omega/2 + J       ,  i Delta/2 ]]
//! ```
//!
//! where `J = dJ / dt` is the homodyne current over the substep.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quantum::{PhysParams, QubitState};

/// Smallest admissible `tr[D rho D^dag]` relative to the scale of `D`.
pub const DEGENERATE_TRACE: f64 = 1e-200;

type M2 = [[C64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn adjoint(a: &M2) -> M2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `exp(A)` of a 2x2 complex matrix via `exp(A) = e^m (cosh s I + sinh(s)/s (A - m I))`,
/// `m = tr A / 2`, `s^2 = ((a - d)/2)^2 + b c`.
pub fn expm2(a: &M2) -> M2 {
    let m = (a[0][0] + a[1][1]) * 0.5;
    let h = (a[0][0] - a[1][1]) * 0.5;
    let s2 = h * h + a[0][1] * a[1][0];
    let s = s2.sqrt();
    let (ch, shs) = if s.norm() < 1e-4 {
        (
            C64::new(1.0, 0.0) + s2 * 0.5 + s2 * s2 / 24.0,
            C64::new(1.0, 0.0) + s2 / 6.0 + s2 * s2 / 120.0,
        )
    } else {
        (s.cosh(), s.sinh() / s)
    };
    let em = m.exp();
    [
        [em * (ch + shs * h), em * shs * a[0][1]],
        [em * shs * a[1][0], em * (ch - shs * h)],
    ]
}

/// Time-ordered propagator `D`, in the `(e, g)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterMatrix {
    pub m: M2,
}

impl Default for FilterMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl FilterMatrix {
    pub fn identity() -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Self { m: [[o, z], [z, o]] }
    }

    /// Generator `G` for drive `omega` and current `j`.
    pub fn generator(omega: f64, j: f64, p: &PhysParams) -> M2 {
        let i = C64::i();
        [
            [-i * (0.5 * p.delta) - 0.5 * p.kappa, -i * (0.5 * omega)],
            [-i * (0.5 * omega) + j, i * (0.5 * p.delta)],
        ]
    }

    /// `self` followed by `other`, i.e. `other.m * self.m`.
    pub fn then(&self, other: &FilterMatrix) -> FilterMatrix {
        FilterMatrix {
            m: mul(&other.m, &self.m),
        }
    }

    pub fn apply(&self, psi: &QubitState) -> (C64, C64) {
        let (e, g) = psi.amplitudes();
        (self.m[0][0] * e + self.m[0][1] * g, self.m[1][0] * e + self.m[1][1] * g)
    }

    fn max_abs(&self) -> f64 {
        self.m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn scaled(&self, f: f64) -> FilterMatrix {
        let mut m = self.m;
        m.iter_mut().flatten().for_each(|z| *z *= f);
        FilterMatrix { m }
    }
}

/// Advances `d` by one substep of length `dt` with drive `omega` and current `j`.
pub fn filter_step(d: &FilterMatrix, omega: f64, j: f64, dt: f64, p: &PhysParams) -> FilterMatrix {
    let mut g = FilterMatrix::generator(omega, j, p);
    g.iter_mut().flatten().for_each(|z| *z *= dt);
    d.then(&FilterMatrix { m: expm2(&g) })
}

/// Hermitian 2x2 density matrix in the `(e, g)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2 {
    pub m: M2,
}

impl DensityMatrix2 {
    pub fn pure(psi: &QubitState) -> Self {
        let (e, g) = psi.amplitudes();
        Self {
            m: [[e * e.conj(), e * g.conj()], [g * e.conj(), g * g.conj()]],
        }
    }

    pub fn maximally_mixed() -> Self {
        let (h, z) = (C64::new(0.5, 0.0), C64::new(0.0, 0.0));
        Self { m: [[h, z], [z, h]] }
    }

    pub fn trace(&self) -> f64 {
        (self.m[0][0] + self.m[1][1]).re
    }

    pub fn purity(&self) -> f64 {
        mul(&self.m, &self.m)[0][0].re + mul(&self.m, &self.m)[1][1].re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.trace();
        let a = self.m[0][0].re - self.m[1][1].re;
        let r = (0.25 * a * a + self.m[0][1].norm_sqr()).sqrt();
        [0.5 * tr - r, 0.5 * tr + r]
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity(&self, psi: &QubitState) -> f64 {
        let (e, g) = psi.amplitudes();
        let v = e.conj() * (self.m[0][0] * e + self.m[0][1] * g) + g.conj() * (self.m[1][0] * e + self.m[1][1] * g);
        v.re
    }

    /// Bloch vector `(<sx>, <sy>, <sz>)`.
    pub fn bloch(&self) -> [f64; 3] {
        let c = self.m[1][0];
        [2.0 * c.re, 2.0 * c.im, (self.m[0][0] - self.m[1][1]).re]
    }

    fn conjugate_by(&self, d: &FilterMatrix) -> M2 {
        mul(&mul(&d.m, &self.m), &adjoint(&d.m))
    }
}

fn check_lengths(drives: &[f64], currents: &[f64]) -> Result<()> {
    if drives.len() != currents.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} drive samples for {} current samples",
            drives.len(),
            currents.len()
        )));
    }
    Ok(())
}

/// Filter for a whole record, kept at unit scale. Returns `D / c` and `ln c`.
///
/// `drives[k]` is the drive over substep `k` and `currents[k]` the homodyne
/// increment `dJ_k` recorded in it.
pub fn filter_record(drives: &[f64], currents: &[f64], dt: f64, p: &PhysParams) -> Result<(FilterMatrix, f64)> {
    check_lengths(drives, currents)?;
    let mut d = FilterMatrix::identity();
    let mut log_scale = 0.0;
    for (&om, &dj) in drives.iter().zip(currents) {
        d = filter_step(&d, om, dj / dt, dt, p);
        let s = d.max_abs();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::DegenerateRecord(s));
        }
        d = d.scaled(1.0 / s);
        log_scale += s.ln();
    }
    Ok((d, log_scale))
}

/// Conditioned density matrix after the record.
pub fn estimate_state(
    rho0: &DensityMatrix2,
    drives: &[f64],
    currents: &[f64],
    dt: f64,
    p: &PhysParams,
) -> Result<DensityMatrix2> {
    let (d, _) = filter_record(drives, currents, dt, p)?;
    normalized(rho0, &d)
}

fn normalized(rho0: &DensityMatrix2, d: &FilterMatrix) -> Result<DensityMatrix2> {
    let mut m = rho0.conjugate_by(d);
    let tr = (m[0][0] + m[1][1]).re;
    if !(tr >= DEGENERATE_TRACE) {
        return Err(Error::DegenerateRecord(tr));
    }
    m.iter_mut().flatten().for_each(|z| *z /= tr);
    // enforce exact hermiticity
    let off = 0.5 * (m[0][1] + m[1][0].conj());
    m[0][1] = off;
    m[1][0] = off.conj();
    m[0][0].im = 0.0;
    m[1][1].im = 0.0;
    Ok(DensityMatrix2 { m })
}

/// Conditioned density matrix after every substep of the record.
pub fn estimate_series(
    rho0: &DensityMatrix2,
    drives: &[f64],
    currents: &[f64],
    dt: f64,
    p: &PhysParams,
) -> Result<Vec<DensityMatrix2>> {
    check_lengths(drives, currents)?;
    let mut d = FilterMatrix::identity();
    let mut out = Vec::with_capacity(drives.len());
    for (&om, &dj) in drives.iter().zip(currents) {
        d = filter_step(&d, om, dj / dt, dt, p);
        let s = d.max_abs();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::DegenerateRecord(s));
        }
        d = d.scaled(1.0 / s);
        out.push(normalized(rho0, &d)?);
    }
    Ok(out)
}

/// `ln( ||D psi0||^2 / ||D phi0||^2 )`: log-likelihood of the record under
/// initial state `psi0` relative to `phi0`.
pub fn log_likelihood_ratio(
    psi0: &QubitState,
    phi0: &QubitState,
    drives: &[f64],
    currents: &[f64],
    dt: f64,
    p: &PhysParams,
) -> Result<f64> {
    let (d, _) = filter_record(drives, currents, dt, p)?;
    let n = |s: &QubitState| {
        let (e, g) = d.apply(s);
        e.norm_sqr() + g.norm_sqr()
    };
    let (a, b) = (n(psi0), n(phi0));
    if !(a >= DEGENERATE_TRACE) {
        return Err(Error::DegenerateRecord(a));
    }
    if !(b >= DEGENERATE_TRACE) {
        return Err(Error::DegenerateRecord(b));
    }
    Ok(a.ln() - b.ln())
}
