//! Reconstructs a forward trajectory by integrating backwards in time on the
//! stored noise. Each checkpoint interval is reversed on its own from the
//! stored end state; the whole path is also reversed without resets.
//!
//! ```sh
//! cargo run --release --example reverse_reconstruction
//! ```

use qubit_feedback::controller::Controller;
use qubit_feedback::quantum::{state_from_angles, BlochAngles, PhysParams, QubitState};
use qubit_feedback::rollout::{rollout, DriveMode};
use qubit_feedback::sde::{integrate_reverse, NoiseGrid, Scheme, SolverConfig};

fn max_diff(a: &QubitState, b: &QubitState) -> f64 {
    let (a, b) = (a.as_array(), b.as_array());
    (0..4).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max)
}

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    for dt in [1e-3f64, 1e-4] {
        let n_sub = (0.02 / dt).round() as usize;
        let cfg = SolverConfig::new(Scheme::EulerHeun, dt, 150, n_sub);
        let noise = NoiseGrid::generate(8, cfg.total_steps(), dt);
        let psi0 = state_from_angles(BlochAngles::new(2.0, 1.0));
        let ctrl = Controller::Handcrafted { omega_max: p.omega_max };
        let tr = rollout(&psi0, &ctrl, &noise, &cfg, &p, DriveMode::PerCheckpoint)?;

        let one = SolverConfig::new(cfg.scheme, dt, 1, n_sub);
        let mut worst = 0.0f64;
        for i in 0..cfg.n_checkpoints {
            let slice = NoiseGrid {
                increments: noise.interval(i, n_sub).to_vec(),
                ..noise.clone()
            };
            let back = integrate_reverse(&tr.states[i + 1], &tr.drives[i..i + 2], &slice, &one, &p, None)?;
            worst = worst.max(max_diff(&back[0], &tr.states[i]));
        }
        let whole = integrate_reverse(tr.states.last().unwrap(), &tr.drives, &noise, &cfg, &p, None);
        let drift = whole.map(|b| format!("{:.2e}", max_diff(&b[0], &psi0)));
        println!("dt {dt:.0e}: worst interval error {worst:.2e}; whole path without resets {drift:?}");
    }
    Ok(())
}
