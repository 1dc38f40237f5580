//! Hand-crafted controller across decay rates at fixed detuning and drive
//! bound.
//!
//! ```sh
//! cargo run --release --example kappa_sweep
//! ```

use qubit_feedback::cli::{sweep_kappa, SweepConfig};
use qubit_feedback::controller::Controller;

fn main() -> qubit_feedback::Result<()> {
    let cfg: SweepConfig = serde_json::from_str(r#"{"n_traj": 256}"#)?;
    let ctrl = Controller::Handcrafted {
        omega_max: cfg.omega_max,
    };
    println!("kappa/delta  kappa   mean F   std F    final 1-F");
    for r in sweep_kappa(&cfg, &ctrl)? {
        println!(
            "{:<11}  {:<6}  {:.4}   {:.4}   {:.3e}",
            r.kappa_over_delta, r.kappa, r.mean_fidelity, r.std_fidelity, r.final_infidelity
        );
    }
    Ok(())
}
