//! Forward-mode sensitivities through checkpoint intervals and the outer
//! reverse sweep over checkpoints for piecewise-constant control.

use serde::{Deserialize, Serialize};

use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::quantum::{expect_pauli_raw, homodyne_increment, Axis, PhysParams, QubitState, Vec4};
use crate::rollout::{checkpoint_input, record_input};
use crate::sde::{step_jvp, NoiseGrid, SolverConfig, TrajectoryRecord};

use super::LossGrads;

/// Pathwise derivatives of one checkpoint interval at frozen noise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSensitivity {
    /// `d_state[r][c] = d psi_{i+1}[r] / d psi_i[c]`.
    pub d_state: [[f64; 4]; 4],
    /// `d psi_{i+1} / d omega`.
    pub d_omega: Vec4,
    /// `d dJ_k / d psi_i` for every substep `k` of the interval.
    pub d_record: Vec<Vec4>,
    /// `d dJ_k / d omega`.
    pub d_record_omega: Vec<f64>,
}

impl IntervalSensitivity {
    pub fn identity() -> Self {
        let mut d_state = [[0.0; 4]; 4];
        for (k, row) in d_state.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        Self {
            d_state,
            d_omega: [0.0; 4],
            d_record: vec![],
            d_record_omega: vec![],
        }
    }

    /// `a^T d_state`.
    pub fn pullback_state(&self, a: &Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for r in 0..4 {
            for c in 0..4 {
                out[c] += a[r] * self.d_state[r][c];
            }
        }
        out
    }
}

#[inline]
fn sx_grad(v: &Vec4) -> Vec4 {
    [2.0 * v[2], 2.0 * v[3], 2.0 * v[0], 2.0 * v[1]]
}

#[inline]
fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Integrates one interval at constant drive, propagating the four state
/// directions and the drive direction through every substep including the
/// renormalization. Also returns the interval's homodyne increments.
pub fn interval_sensitivity(
    psi: &QubitState,
    omega: f64,
    noise_slice: &[f64],
    cfg: &SolverConfig,
    p: &PhysParams,
) -> Result<(QubitState, IntervalSensitivity, Vec<f64>)> {
    let mut tangents: [(Vec4, f64); 5] = [
        ([1.0, 0.0, 0.0, 0.0], 0.0),
        ([0.0, 1.0, 0.0, 0.0], 0.0),
        ([0.0, 0.0, 1.0, 0.0], 0.0),
        ([0.0, 0.0, 0.0, 1.0], 0.0),
        ([0.0; 4], 1.0),
    ];
    let n = noise_slice.len();
    let mut d_record = Vec::with_capacity(n);
    let mut d_record_omega = Vec::with_capacity(n);
    let mut dj = Vec::with_capacity(n);
    let mut v = psi.as_array();
    let scale = p.kappa * cfg.dt;
    for &dw in noise_slice {
        dj.push(homodyne_increment(expect_pauli_raw(&v, Axis::X), cfg.dt, dw, p.kappa));
        let g = sx_grad(&v);
        let mut row = [0.0; 4];
        for c in 0..4 {
            row[c] = scale * dot4(&g, &tangents[c].0);
        }
        d_record.push(row);
        d_record_omega.push(scale * dot4(&g, &tangents[4].0));
        v = step_jvp(cfg.scheme, &v, omega, cfg.dt, dw, p, &mut tangents)?;
    }
    let mut d_state = [[0.0; 4]; 4];
    for c in 0..4 {
        for r in 0..4 {
            d_state[r][c] = tangents[c].0[r];
        }
    }
    let sens = IntervalSensitivity {
        d_state,
        d_omega: tangents[4].0,
        d_record,
        d_record_omega,
    };
    Ok((QubitState::from_array(v), sens, dj))
}

/// Piecewise-constant closed-loop trajectory together with the sensitivities
/// of every interval.
pub fn rollout_with_sensitivities(
    psi0: &QubitState,
    ctrl: &Controller,
    noise: &NoiseGrid,
    cfg: &SolverConfig,
    p: &PhysParams,
) -> Result<(TrajectoryRecord, Vec<IntervalSensitivity>)> {
    cfg.validate()?;
    if noise.len() < cfg.total_steps() {
        return Err(Error::DimensionMismatch(format!(
            "{} noise increments for {} substeps",
            noise.len(),
            cfg.total_steps()
        )));
    }
    let n = cfg.n_checkpoints;
    let mut states = vec![*psi0];
    let mut drives = vec![0.0];
    let mut dj = Vec::with_capacity(cfg.total_steps());
    let mut sens = Vec::with_capacity(n);
    for i in 0..n {
        let input = checkpoint_input(ctrl, &states[i], &dj, &drives, i, cfg.n_sub);
        let om = ctrl.drive(&input)?;
        let (next, s, rec) = interval_sensitivity(&states[i], om, noise.interval(i, cfg.n_sub), cfg, p)?;
        states.push(next);
        drives.push(om);
        dj.extend(rec);
        sens.push(s);
    }
    let tr = TrajectoryRecord {
        times: (0..=n).map(|i| cfg.checkpoint_time(i)).collect(),
        states,
        drives,
        dj,
        seed: noise.seed,
        stream: noise.stream,
    };
    Ok((tr, sens))
}

/// Which controller input the reverse sweep differentiates through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiecewiseKind {
    /// Controller reads the checkpoint state.
    StatePw,
    /// Controller reads the previous interval's record and recent drives.
    Current,
}

/// Reverse sweep over checkpoints for piecewise-constant control.
///
/// With `psi_bar`, `omega_bar` and `record_bar` the adjoints of checkpoint
/// states, drives and interval records, interval `i` contributes
/// `omega_bar[i+1] += psi_bar[i+1] . d_omega + record_bar[i] . d_record_omega`
/// and `psi_bar[i] += psi_bar[i+1] . d_state + record_bar[i] . d_record`;
/// then the controller call that produced `drives[i+1]` is differentiated,
/// sending its input gradient back into the state (state kind) or into the
/// previous record and the remembered drives (current kind).
pub fn chain_backprop(
    traj: &TrajectoryRecord,
    sens: &[IntervalSensitivity],
    grads: &LossGrads,
    ctrl: &Controller,
    kind: PiecewiseKind,
) -> Result<Vec<f64>> {
    let n = traj.n_checkpoints();
    traj.validate(None)?;
    if sens.len() != n || grads.d_states.len() != n + 1 || grads.d_drives.len() != n + 1 {
        return Err(Error::InconsistentTrajectory(format!(
            "{n} intervals with {} sensitivities and {}/{} loss gradients",
            sens.len(),
            grads.d_states.len(),
            grads.d_drives.len()
        )));
    }
    let n_sub = sens.first().map_or(0, |s| s.d_record.len());
    if sens
        .iter()
        .any(|s| s.d_record.len() != n_sub || s.d_record_omega.len() != n_sub)
    {
        return Err(Error::InconsistentTrajectory("intervals of unequal length".into()));
    }
    match (kind, ctrl) {
        (PiecewiseKind::Current, Controller::Current(_)) | (PiecewiseKind::StatePw, Controller::State(_)) => {}
        (_, Controller::Handcrafted { .. } | Controller::Constant(_)) => {}
        _ => {
            return Err(Error::InconsistentTrajectory(format!(
                "{kind:?} sweep for a {} controller",
                ctrl.kind()
            )))
        }
    }
    if kind == PiecewiseKind::Current && traj.dj.len() != n * n_sub {
        return Err(Error::InconsistentTrajectory(format!(
            "{} record entries for {n} intervals of {n_sub}",
            traj.dj.len()
        )));
    }

    let mut psi_bar = grads.d_states.clone();
    let mut omega_bar = grads.d_drives.clone();
    let mut record_bar = vec![vec![0.0; n_sub]; n];
    let mut theta = vec![0.0; ctrl.n_params()];

    for i in (0..n).rev() {
        let s = &sens[i];
        let pb = psi_bar[i + 1];
        let rb = &record_bar[i];
        omega_bar[i + 1] += dot4(&pb, &s.d_omega) + rb.iter().zip(&s.d_record_omega).map(|(a, b)| a * b).sum::<f64>();
        let mut back = s.pullback_state(&pb);
        for (r, row) in rb.iter().zip(&s.d_record) {
            for c in 0..4 {
                back[c] += r * row[c];
            }
        }
        for c in 0..4 {
            psi_bar[i][c] += back[c];
        }

        let ob = omega_bar[i + 1];
        match ctrl {
            Controller::State(net) => {
                let (_, cache) = net.forward(&traj.states[i].as_array())?;
                let dx = net.backward(&cache, &[ob], Some(&mut theta))?;
                for c in 0..4 {
                    psi_bar[i][c] += dx[c];
                }
            }
            Controller::Current(net) => {
                let (j_tau, omega_m) = record_input(&traj.dj, &traj.drives, i, n_sub, net.memory_len());
                let (_, cache) = net.forward(&j_tau, &omega_m)?;
                let (dj, dm) = net.backward(&cache, ob, Some(&mut theta))?;
                if i > 0 {
                    for (a, b) in record_bar[i - 1].iter_mut().zip(&dj) {
                        *a += b;
                    }
                }
                for (k, d) in dm.iter().enumerate() {
                    if k <= i {
                        omega_bar[i - k] += d;
                    }
                }
            }
            _ => {}
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{state_from_angles, BlochAngles};
    use crate::sde::Scheme;

    #[test]
    fn empty_interval_is_identity() {
        let p = PhysParams::default();
        let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 1, 1);
        let psi = state_from_angles(BlochAngles::new(1.0, 2.0));
        let (next, s, dj) = interval_sensitivity(&psi, 3.0, &[], &cfg, &p).unwrap();
        assert_eq!(next, psi);
        assert_eq!(s, IntervalSensitivity::identity());
        assert!(dj.is_empty());
    }

    #[test]
    fn matches_frozen_noise_differences() {
        let p = PhysParams::default();
        for scheme in [Scheme::RkMilstein, Scheme::EulerHeun] {
            let cfg = SolverConfig::new(scheme, 1e-3, 1, 20);
            let noise = NoiseGrid::generate(12, 20, 1e-3);
            let psi = state_from_angles(BlochAngles::new(1.3, 0.4));
            let om = 2.5;
            let (_, s, _) = interval_sensitivity(&psi, om, &noise.increments, &cfg, &p).unwrap();
            let h = 1e-6;
            let run = |v: Vec4, o: f64| {
                let (end, _, dj) =
                    interval_sensitivity(&QubitState::from_array(v), o, &noise.increments, &cfg, &p).unwrap();
                (end.as_array(), dj)
            };
            let base = psi.as_array();
            for c in 0..5 {
                let (mut a, mut b) = (base, base);
                let (mut oa, mut ob) = (om, om);
                if c < 4 {
                    a[c] += h;
                    b[c] -= h;
                } else {
                    oa += h;
                    ob -= h;
                }
                let ((ya, ja), (yb, jb)) = (run(a, oa), run(b, ob));
                for r in 0..4 {
                    let fd = (ya[r] - yb[r]) / (2.0 * h);
                    let an = if c < 4 { s.d_state[r][c] } else { s.d_omega[r] };
                    assert!(
                        (fd - an).abs() < 1e-5 * an.abs().max(1e-2),
                        "{scheme:?} ({r},{c}): {fd} vs {an}"
                    );
                }
                for k in 0..20 {
                    let fd = (ja[k] - jb[k]) / (2.0 * h);
                    let an = if c < 4 { s.d_record[k][c] } else { s.d_record_omega[k] };
                    assert!((fd - an).abs() < 1e-5 * an.abs().max(1e-4), "{scheme:?} record {k},{c}");
                }
            }
        }
    }

    #[test]
    fn closed_interval_matches_projected_exponential() {
        // kappa = 0, constant drive: the tangent map is the rotation itself,
        // projected onto the sphere's tangent space
        let p = PhysParams::new(20.0, 0.0, 10.0);
        let cfg = SolverConfig::new(Scheme::EulerHeun, 1e-4, 1, 200);
        let noise = NoiseGrid::zeros(200, 1e-4);
        let psi = state_from_angles(BlochAngles::new(0.9, 2.0));
        let (end, s, _) = interval_sensitivity(&psi, 4.0, &noise.increments, &cfg, &p).unwrap();
        let t = 200.0 * 1e-4;
        let w = (400.0f64 + 16.0).sqrt();
        let (sn, cs) = (0.5 * w * t).sin_cos();
        let (nz, nx) = (20.0 / w, 4.0 / w);
        // U = c I - i s (nz sz + nx sx), acting on the real layout
        let u = |v: &Vec4| -> Vec4 {
            let (e_re, e_im, g_re, g_im) = (v[0], v[1], v[2], v[3]);
            let he = (nz * e_re + nx * g_re, nz * e_im + nx * g_im);
            let hg = (nx * e_re - nz * g_re, nx * e_im - nz * g_im);
            [
                cs * e_re + sn * he.1,
                cs * e_im - sn * he.0,
                cs * g_re + sn * hg.1,
                cs * g_im - sn * hg.0,
            ]
        };
        let y = end.as_array();
        for c in 0..4 {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            let ue = u(&e);
            let radial = dot4(&y, &ue);
            for r in 0..4 {
                let want = ue[r] - radial * y[r];
                assert!(
                    (s.d_state[r][c] - want).abs() < 1e-6,
                    "({r},{c}) {} vs {want}",
                    s.d_state[r][c]
                );
            }
        }
    }

    fn sweep_vs_differences(ctrl: &Controller, kind: PiecewiseKind, cfg: &SolverConfig) -> f64 {
        use crate::autodiff::fd_plateau;
        use crate::training::{loss_eval, target_state, LossConfig};
        let p = PhysParams::default();
        let lc = LossConfig::new(0.8, 1.8, 1e-3);
        let noise = NoiseGrid::for_trajectory(4, 2, cfg.total_steps(), cfg.dt);
        let psi = state_from_angles(BlochAngles::new(2.2, 1.1));
        let (tr, sens) = rollout_with_sensitivities(&psi, ctrl, &noise, cfg, &p).unwrap();
        let (_, lg) = loss_eval(&tr, &target_state(), &lc);
        let g = chain_backprop(&tr, &sens, &lg, ctrl, kind).unwrap();
        let theta = ctrl.flat();
        let mut loss = |th: &[f64]| {
            let mut c = ctrl.clone();
            c.set_flat(th)?;
            let tr = rollout_with_sensitivities(&psi, &c, &noise, cfg, &p)?.0;
            Ok(loss_eval(&tr, &target_state(), &lc).0)
        };
        let coords: Vec<usize> = (0..theta.len()).step_by(theta.len() / 25 + 1).collect();
        let fd = fd_plateau(&mut loss, &theta, &coords, &[1e-5, 3e-6, 1e-6, 3e-7, 1e-7]).unwrap();
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        coords
            .iter()
            .zip(&fd)
            .map(|(&k, f)| (g[k] - f).abs() / f.abs().max(1e-3 * scale))
            .fold(0.0, f64::max)
    }

    #[test]
    fn state_sweep_matches_frozen_noise_differences() {
        use crate::controller::{Head, MlpParams};
        let ctrl = Controller::State(MlpParams::init(&[4, 16, 8, 1], Head::Softsign { scale: 10.0 }, 3).unwrap());
        for scheme in [Scheme::RkMilstein, Scheme::EulerHeun] {
            let cfg = SolverConfig::new(scheme, 1e-3, 20, 10);
            let e = sweep_vs_differences(&ctrl, PiecewiseKind::StatePw, &cfg);
            assert!(e < 1e-3, "{scheme:?}: {e}");
        }
    }

    #[test]
    fn record_sweep_matches_frozen_noise_differences() {
        use crate::controller::CurrentNetParams;
        let mut ctrl =
            Controller::Current(CurrentNetParams::init(&[10, 12, 6], &[3, 6, 6], &[12, 8, 1], 10.0, 5).unwrap());
        // zero inputs at the first checkpoint meet zero biases exactly on the
        // ReLU kink, where central differences see half a slope
        let shifted: Vec<f64> = ctrl
            .flat()
            .iter()
            .enumerate()
            .map(|(k, x)| x + 0.05 * (k as f64).sin())
            .collect();
        ctrl.set_flat(&shifted).unwrap();
        let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 20, 10);
        let e = sweep_vs_differences(&ctrl, PiecewiseKind::Current, &cfg);
        assert!(e < 1e-3, "{e}");
    }
}
