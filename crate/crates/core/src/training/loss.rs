use serde::{Deserialize, Serialize};

use crate::autodiff::LossGrads;
use crate::error::{Error, Result};
use crate::quantum::{fidelity, fidelity_grad, QubitState};
use crate::sde::TrajectoryRecord;

/// Number of trailing checkpoints in the end-phase fidelity term.
pub const TAIL_CHECKPOINTS: usize = 50;

/// Weights of the infidelity, end-phase infidelity and drive-amplitude terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub c_f: f64,
    pub c_f50: f64,
    pub c_omega: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            c_f: 1.0,
            c_f50: 0.0,
            c_omega: 0.0,
        }
    }
}

impl LossConfig {
    pub fn new(c_f: f64, c_f50: f64, c_omega: f64) -> Self {
        Self { c_f, c_f50, c_omega }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.c_f, self.c_f50, self.c_omega];
        if w.iter().any(|c| !(*c >= 0.0)) || w.iter().all(|c| *c == 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be nonnegative and not all zero: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Loss of one trajectory and its gradients w.r.t. checkpoint states and drives.
///
/// `c_f * mean(1 - F_i) + c_f50 * mean over the last 50 checkpoints of (1 - F_i)
/// + c_omega * mean(Omega_i^2)`, all means over checkpoints `0..=N`.
pub fn loss_eval(traj: &TrajectoryRecord, target: &QubitState, cfg: &LossConfig) -> (f64, LossGrads) {
    let m = traj.states.len();
    let mut grads = LossGrads {
        d_states: vec![[0.0; 4]; m],
        d_drives: vec![0.0; traj.drives.len()],
    };
    if m == 0 {
        return (0.0, grads);
    }
    let tail = TAIL_CHECKPOINTS.min(m);
    let mut value = 0.0;
    for (i, s) in traj.states.iter().enumerate() {
        let mut w = cfg.c_f / m as f64;
        if i >= m - tail {
            w += cfg.c_f50 / tail as f64;
        }
        if w == 0.0 {
            continue;
        }
        value += w * (1.0 - fidelity(s, target));
        let g = fidelity_grad(s, target);
        for k in 0..4 {
            grads.d_states[i][k] = -w * g[k];
        }
    }
    if cfg.c_omega != 0.0 && !traj.drives.is_empty() {
        let w = cfg.c_omega / traj.drives.len() as f64;
        for (i, om) in traj.drives.iter().enumerate() {
            value += w * om * om;
            grads.d_drives[i] = 2.0 * w * om;
        }
    }
    (value, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{state_from_angles, BlochAngles};

    fn pinned(s: QubitState, n: usize, om: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            times: (0..=n).map(|i| i as f64).collect(),
            states: vec![s; n + 1],
            drives: vec![om; n + 1],
            dj: vec![],
            seed: 0,
            stream: 0,
        }
    }

    #[test]
    fn pinned_at_target_is_zero() {
        let (l, _) = loss_eval(
            &pinned(QubitState::excited(), 150, 0.0),
            &QubitState::excited(),
            &LossConfig::new(1.2, 0.8, 1e-3),
        );
        assert_eq!(l, 0.0);
    }

    #[test]
    fn pinned_orthogonal_is_one() {
        let (l, _) = loss_eval(
            &pinned(QubitState::ground(), 150, 0.0),
            &QubitState::excited(),
            &LossConfig::new(1.0, 0.0, 0.0),
        );
        assert!((l - 1.0).abs() < 1e-13, "{l}");
    }

    #[test]
    fn matches_direct_recomputation_and_differences() {
        let n = 80;
        let states: Vec<QubitState> = (0..=n)
            .map(|i| state_from_angles(BlochAngles::new(0.03 * i as f64, 0.1 * i as f64)))
            .collect();
        let drives: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.2).sin() * 5.0).collect();
        let tr = TrajectoryRecord {
            times: vec![0.0; n + 1],
            states: states.clone(),
            drives: drives.clone(),
            dj: vec![],
            seed: 0,
            stream: 0,
        };
        let cfg = LossConfig::new(0.8, 1.8, 1e-3);
        let tgt = QubitState::excited();
        let (l, g) = loss_eval(&tr, &tgt, &cfg);
        let inf: Vec<f64> = states.iter().map(|s| 1.0 - fidelity(s, &tgt)).collect();
        let want = 0.8 * inf.iter().sum::<f64>() / 81.0
            + 1.8 * inf[31..].iter().sum::<f64>() / 50.0
            + 1e-3 * drives.iter().map(|o| o * o).sum::<f64>() / 81.0;
        assert!((l - want).abs() < 1e-14);
        let h = 1e-6;
        for i in [0, 40, 79] {
            let mut a = tr.clone();
            a.drives[i] += h;
            let mut b = tr.clone();
            b.drives[i] -= h;
            let fd = (loss_eval(&a, &tgt, &cfg).0 - loss_eval(&b, &tgt, &cfg).0) / (2.0 * h);
            assert!((fd - g.d_drives[i]).abs() < 1e-9);
            for k in 0..4 {
                let mut a = tr.clone();
                let mut v = a.states[i].as_array();
                v[k] += h;
                a.states[i] = QubitState::from_array(v);
                let mut b = tr.clone();
                let mut v = b.states[i].as_array();
                v[k] -= h;
                b.states[i] = QubitState::from_array(v);
                let fd = (loss_eval(&a, &tgt, &cfg).0 - loss_eval(&b, &tgt, &cfg).0) / (2.0 * h);
                assert!((fd - g.d_states[i][k]).abs() < 1e-9);
            }
        }
    }
}
