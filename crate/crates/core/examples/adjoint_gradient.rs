//! Continuous adjoint gradients: the stochastic adjoint for a controller
//! inside the drift, and its unmonitored limit checked against the adjoint
//! of the closed-system ODE.
//!
//! ```sh
//! cargo run --release --example adjoint_gradient
//! ```

use qubit_feedback::autodiff::{adjoint_ode_backward, adjoint_sde_backward, AdjointDrive};
use qubit_feedback::cli::cosine;
use qubit_feedback::controller::{Controller, Head, MlpParams};
use qubit_feedback::quantum::{state_from_angles, BlochAngles, PhysParams, QubitState};
use qubit_feedback::rollout::{rollout, rollout_ode, DriveMode};
use qubit_feedback::sde::{NoiseGrid, Scheme, SolverConfig};
use qubit_feedback::training::{loss_eval, LossConfig};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let target = QubitState::excited();
    let lcfg = LossConfig::default();
    let psi0 = state_from_angles(BlochAngles::new(1.7, 0.2));
    let ctrl = Controller::State(MlpParams::init(
        &[4, 32, 16, 1],
        Head::Softsign { scale: p.omega_max },
        5,
    )?);

    let cfg = SolverConfig::new(Scheme::EulerHeun, 1e-4, 20, 100);
    let noise = NoiseGrid::generate(6, cfg.total_steps(), cfg.dt);
    let traj = rollout(&psi0, &ctrl, &noise, &cfg, &p, DriveMode::PerSubstep)?;
    let (loss, grads) = loss_eval(&traj, &target, &lcfg);
    let adj = adjoint_sde_backward(&traj, &noise, &ctrl, &grads, &p, &cfg, AdjointDrive::Continuous)?;
    let gnorm = adj.a_theta.iter().map(|g| g * g).sum::<f64>().sqrt();
    println!(
        "monitored: loss {loss:.5}, |grad| {gnorm:.4e}, d loss / d psi0 {:?}",
        adj.a_psi
    );

    let closed = p.closed();
    let quiet = NoiseGrid::zeros(cfg.total_steps(), cfg.dt);
    let t = rollout(&psi0, &ctrl, &quiet, &cfg, &closed, DriveMode::PerSubstep)?;
    let (_, g) = loss_eval(&t, &target, &lcfg);
    let sde = adjoint_sde_backward(&t, &quiet, &ctrl, &g, &closed, &cfg, AdjointDrive::Continuous)?;
    let o = rollout_ode(&psi0, &ctrl, cfg.n_checkpoints, cfg.t_end(), &closed, 1e-10)?;
    let (_, g) = loss_eval(&o, &target, &lcfg);
    let ode = adjoint_ode_backward(&o, &ctrl, &g, &closed, 1e-10)?;
    println!(
        "unmonitored limit: cosine(SDE adjoint, ODE adjoint) = {:.8}",
        cosine(&sde.a_theta, &ode.a_theta)
    );
    Ok(())
}
