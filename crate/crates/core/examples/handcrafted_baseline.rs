//! Hand-crafted sign-rule controller on 256 random initial states.
//!
//! ```sh
//! cargo run --release --example handcrafted_baseline
//! ```

use qubit_feedback::controller::Controller;
use qubit_feedback::quantum::PhysParams;
use qubit_feedback::sde::{Scheme, SolverConfig};
use qubit_feedback::training::{evaluate, Dynamics};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let scfg = SolverConfig::new(Scheme::RkMilstein, 1e-3, 150, 20);
    let ctrl = Controller::Handcrafted { omega_max: p.omega_max };
    let r = evaluate(&ctrl, 256, &scfg, &p, Dynamics::Piecewise, 0)?;
    println!(
        "mean fidelity {:.3} +- {:.3}; last 50 checkpoints {:.3} +- {:.3}",
        r.summary.mean_fidelity, r.summary.std_fidelity, r.summary.tail_mean_fidelity, r.summary.tail_std_fidelity
    );
    println!("t      F(mean)  F(std)  omega(mean)");
    for i in (0..r.times.len()).step_by(15) {
        println!(
            "{:.2}  {:.4}   {:.4}  {:+.3}",
            r.times[i], r.mean_fidelity[i], r.std_fidelity[i], r.mean_drive[i]
        );
    }
    Ok(())
}
