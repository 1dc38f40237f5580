//! Adaptive Dormand-Prince 5(4) integration of the deterministic drift, with
//! PI step-size control and the standard continuous extension of order 4.

use crate::error::{Error, Result};
use crate::quantum::{drift, PhysParams, QubitState, Vec4};

/// Smallest step the controller may propose before giving up.
pub const MIN_STEP: f64 = 1e-12;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;

/// One accepted step with its interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Dp5Step {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec4,
    pub y1: Vec4,
    rcont: [Vec4; 4],
}

impl Dp5Step {
    /// Interpolated state at `t` in `[t0, t0 + h]`.
    pub fn interpolate(&self, t: f64) -> Vec4 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r2, r3, r4, r5] = &self.rcont;
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = self.y0[k] + th * (r2[k] + th1 * (r3[k] + th * (r4[k] + th1 * r5[k])));
        }
        out
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Result of [`step_rk54`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkOutcome {
    pub state: QubitState,
    pub dt_taken: f64,
    pub dt_next: f64,
}

/// Step-size controller state carried between steps.
#[derive(Debug, Clone, Copy)]
pub struct Rk54 {
    pub tol: f64,
    err_prev: f64,
}

impl Rk54 {
    pub fn new(tol: f64) -> Self {
        Self { tol, err_prev: 1e-4 }
    }

    /// Takes one accepted step from `(t, y)` starting with trial size `h`.
    /// Returns the step and the proposed next size.
    pub fn step(
        &mut self,
        y: &Vec4,
        t: f64,
        mut h: f64,
        f: &mut dyn FnMut(f64, &Vec4) -> Vec4,
    ) -> Result<(Dp5Step, f64)> {
        let k1 = f(t, y);
        let mut rejected = false;
        loop {
            if !(h >= MIN_STEP) {
                return Err(Error::StepSizeUnderflow { t, dt: h });
            }
            let mut k = [[0.0; 4]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = *y;
                for j in 0..s {
                    let a = A[s][j] * h;
                    if a != 0.0 {
                        for c in 0..4 {
                            ys[c] += a * k[j][c];
                        }
                    }
                }
                if s == 6 {
                    // FSAL: the last stage point is the new solution
                    let y1 = ys;
                    k[6] = f(t + h, &y1);
                } else {
                    k[s] = f(t + C[s] * h, &ys);
                }
            }
            let mut y1 = *y;
            for j in 0..6 {
                for c in 0..4 {
                    y1[c] += h * A[6][j] * k[j][c];
                }
            }
            let mut acc = 0.0;
            for c in 0..4 {
                let e: f64 = (0..7).map(|j| E[j] * k[j][c]).sum::<f64>() * h;
                let sc = self.tol + self.tol * y[c].abs().max(y1[c].abs());
                acc += (e / sc).powi(2);
            }
            let err = (acc / 4.0).sqrt();
            if !err.is_finite() {
                h *= 0.2;
                rejected = true;
                continue;
            }
            if err <= 1.0 {
                let err = err.max(1e-10);
                let mut fac = SAFETY * err.powf(-ALPHA) * self.err_prev.powf(BETA);
                fac = fac.clamp(0.2, 10.0);
                if rejected {
                    fac = fac.min(1.0);
                }
                self.err_prev = err;
                let mut r = [[0.0; 4]; 4];
                for c in 0..4 {
                    let ydiff = y1[c] - y[c];
                    let bspl = h * k[0][c] - ydiff;
                    r[0][c] = ydiff;
                    r[1][c] = bspl;
                    r[2][c] = ydiff - h * k[6][c] - bspl;
                    r[3][c] = h * (0..7).map(|j| D[j] * k[j][c]).sum::<f64>();
                }
                return Ok((
                    Dp5Step {
                        t0: t,
                        h,
                        y0: *y,
                        y1,
                        rcont: r,
                    },
                    h * fac,
                ));
            }
            let fac = (SAFETY * err.powf(-ALPHA)).max(0.2);
            h *= fac;
            rejected = true;
        }
    }

    /// Integrates from `t0` to exactly `t1`, returning the end state, every
    /// accepted step and the proposed step for continuing past `t1`.
    pub fn integrate(
        &mut self,
        y0: &Vec4,
        t0: f64,
        t1: f64,
        h0: f64,
        f: &mut dyn FnMut(f64, &Vec4) -> Vec4,
    ) -> Result<(Vec4, Vec<Dp5Step>, f64)> {
        let mut y = *y0;
        let mut t = t0;
        let mut h = h0;
        let mut steps = Vec::new();
        let span = t1 - t0;
        while t1 - t > 1e-14 * span.abs().max(1.0) {
            let left = t1 - t;
            let last = h >= left;
            let trial = if last { left } else { h };
            let (st, next) = self.step(&y, t, trial, f)?;
            y = st.y1;
            let full = st.h == trial;
            t = if last && full { t1 } else { st.t1() };
            h = if last && full { next.max(h) } else { next };
            steps.push(st);
        }
        Ok((y, steps, h))
    }
}

/// Single adaptive step of the deterministic drift with a state-dependent drive.
pub fn step_rk54(
    psi: &QubitState,
    omega_fn: &mut dyn FnMut(f64, &Vec4) -> f64,
    t: f64,
    dt_suggest: f64,
    tol: f64,
    p: &PhysParams,
) -> Result<RkOutcome> {
    let mut rk = Rk54::new(tol);
    let mut f = |t: f64, y: &Vec4| drift(y, omega_fn(t, y), p);
    let (st, next) = rk.step(&psi.as_array(), t, dt_suggest, &mut f)?;
    Ok(RkOutcome {
        state: QubitState::from_array(st.y1),
        dt_taken: st.h,
        dt_next: next,
    })
}
