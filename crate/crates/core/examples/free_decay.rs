//! Undriven ensemble starting in the excited state. The ensemble average of
//! `<sz>` follows the Lindblad decay `-1 + 2 exp(-kappa t)`.
//!
//! ```sh
//! cargo run --release --example free_decay
//! ```

use qubit_feedback::controller::Controller;
use qubit_feedback::quantum::{expect_pauli, Axis, PhysParams, QubitState};
use qubit_feedback::rollout::{rollout, DriveMode};
use qubit_feedback::sde::{NoiseGrid, Scheme, SolverConfig};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 30, 100);
    let n = 1000;
    let mut mean = vec![0.0; cfg.n_checkpoints + 1];
    for j in 0..n {
        let noise = NoiseGrid::for_trajectory(1, j, cfg.total_steps(), cfg.dt);
        let tr = rollout(
            &QubitState::excited(),
            &Controller::Constant(0.0),
            &noise,
            &cfg,
            &p,
            DriveMode::PerCheckpoint,
        )?;
        for (m, s) in mean.iter_mut().zip(&tr.states) {
            *m += expect_pauli(s, Axis::Z) / n as f64;
        }
    }
    println!("t     <sz> ensemble  Lindblad");
    for (i, m) in mean.iter().enumerate().step_by(3) {
        let t = cfg.checkpoint_time(i);
        println!("{t:.1}   {m:+.4}        {:+.4}", -1.0 + 2.0 * (-p.kappa * t).exp());
    }
    Ok(())
}
