//! Parameter gradient of the trajectory loss for a controller queried at
//! checkpoints, from per-interval sensitivities and a reverse sweep, compared
//! with central differences on the same frozen noise.
//!
//! ```sh
//! cargo run --release --example pathwise_gradient
//! ```

use qubit_feedback::autodiff::{chain_backprop, fd_plateau, rollout_with_sensitivities, PiecewiseKind};
use qubit_feedback::controller::{Controller, Head, MlpParams};
use qubit_feedback::quantum::{state_from_angles, BlochAngles, PhysParams, QubitState};
use qubit_feedback::sde::{NoiseGrid, Scheme, SolverConfig};
use qubit_feedback::training::{loss_eval, LossConfig};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let cfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 40, 10);
    let noise = NoiseGrid::generate(4, cfg.total_steps(), cfg.dt);
    let psi0 = state_from_angles(BlochAngles::new(2.1, 0.7));
    let lcfg = LossConfig::new(0.8, 1.8, 1e-3);
    let target = QubitState::excited();
    let ctrl = Controller::State(MlpParams::init(
        &[4, 16, 8, 1],
        Head::Softsign { scale: p.omega_max },
        3,
    )?);

    let (traj, sens) = rollout_with_sensitivities(&psi0, &ctrl, &noise, &cfg, &p)?;
    let (loss, grads) = loss_eval(&traj, &target, &lcfg);
    let grad = chain_backprop(&traj, &sens, &grads, &ctrl, PiecewiseKind::StatePw)?;
    println!("loss {loss:.6}, {} parameters", grad.len());

    let coords: Vec<usize> = (0..ctrl.n_params()).step_by(23).collect();
    let mut f = |th: &[f64]| {
        let mut c = ctrl.clone();
        c.set_flat(th)?;
        let (t, _) = rollout_with_sensitivities(&psi0, &c, &noise, &cfg, &p)?;
        Ok(loss_eval(&t, &target, &lcfg).0)
    };
    let fd = fd_plateau(&mut f, &ctrl.flat(), &coords, &[1e-5, 3e-6, 1e-6, 3e-7])?;
    println!("param   sweep          differences");
    for (k, &c) in coords.iter().enumerate() {
        println!("{c:5}   {:+.6e}  {:+.6e}", grad[c], fd[k]);
    }
    Ok(())
}
