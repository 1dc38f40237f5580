//! A state-aware network controller: query it, save it as JSON, load it back
//! and check the reloaded copy drives identically.
//!
//! ```sh
//! cargo run --release --example network_controller
//! ```

use qubit_feedback::controller::{Controller, Head, MlpParams};
use qubit_feedback::quantum::{state_from_angles, BlochAngles, PhysParams};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let net = MlpParams::init(&[4, 64, 32, 1], Head::Softsign { scale: p.omega_max }, 7)?;
    let ctrl = Controller::State(net);
    println!("{} controller with {} parameters", ctrl.kind(), ctrl.n_params());

    let dir = std::env::temp_dir().join("qfb-network-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.json");
    ctrl.save_path(&path)?;
    let back = Controller::load_path(&path)?;

    let hand = Controller::Handcrafted { omega_max: p.omega_max };
    println!("theta   network   reloaded  hand-crafted  (phi = 0.4)");
    for k in 0..=6 {
        let psi = state_from_angles(BlochAngles::new(k as f64 * std::f64::consts::PI / 6.0, 0.4)).as_array();
        let a = ctrl.drive_for_state(&psi)?;
        let b = back.drive_for_state(&psi)?;
        assert_eq!(a, b);
        println!(
            "{:.3}   {a:+.4}   {b:+.4}   {:+.4}",
            k as f64 * std::f64::consts::PI / 6.0,
            hand.drive_for_state(&psi)?
        );
    }
    println!("saved to {}", path.display());
    Ok(())
}
