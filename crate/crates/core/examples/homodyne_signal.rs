//! One undriven monitored trajectory: the homodyne current next to the
//! underlying `<sx>`. Averaging the current over a window recovers the
//! signal only roughly; the shot noise dominates at the substep scale.
//!
//! ```sh
//! cargo run --release --example homodyne_signal
//! ```

use qubit_feedback::controller::Controller;
use qubit_feedback::quantum::{expect_pauli, state_from_angles, Axis, BlochAngles, PhysParams};
use qubit_feedback::rollout::{rollout, DriveMode};
use qubit_feedback::sde::{NoiseGrid, Scheme, SolverConfig};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 100, 20);
    let noise = NoiseGrid::generate(3, cfg.total_steps(), cfg.dt);
    let psi0 = state_from_angles(BlochAngles::new(1.2, 0.0));
    let tr = rollout(
        &psi0,
        &Controller::Constant(0.0),
        &noise,
        &cfg,
        &p,
        DriveMode::PerCheckpoint,
    )?;
    println!("t      <sx>     J averaged over the interval / (kappa dt)");
    for i in (0..cfg.n_checkpoints).step_by(5) {
        let window = &tr.dj[i * cfg.n_sub..(i + 1) * cfg.n_sub];
        let j = window.iter().sum::<f64>() / (p.kappa * cfg.interval());
        println!(
            "{:.2}  {:+.4}  {:+.3}",
            tr.times[i],
            expect_pauli(&tr.states[i], Axis::X),
            j
        );
    }
    Ok(())
}
