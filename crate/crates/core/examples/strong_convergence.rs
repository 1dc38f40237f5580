//! Strong error of both steppers against a fine reference on the same
//! Brownian path, for a sequence of step sizes.
//!
//! ```sh
//! cargo run --release --example strong_convergence
//! ```

use qubit_feedback::quantum::{state_from_angles, BlochAngles, PhysParams};
use qubit_feedback::sde::{integrate_interval, NoiseGrid, Scheme, SolverConfig};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let psi = state_from_angles(BlochAngles::new(1.0, 0.5));
    let t_end = 0.5;
    let fine_n = 1usize << 18;
    let fine_dt = t_end / fine_n as f64;
    let paths = 40;
    for scheme in [Scheme::RkMilstein, Scheme::EulerHeun] {
        println!("{scheme:?}");
        let mut prev = None;
        for factor in [16usize, 32, 64, 128, 256] {
            let mut err = 0.0;
            for seed in 0..paths {
                let fine = NoiseGrid::generate(seed, fine_n, fine_dt);
                let fcfg = SolverConfig::new(scheme, fine_dt, 1, fine_n);
                let reference = integrate_interval(&psi, 2.0, &fine.increments, &fcfg, &p)?;
                let coarse = fine.coarsen(factor);
                let ccfg = SolverConfig::new(scheme, coarse.dt, 1, coarse.len());
                let y = integrate_interval(&psi, 2.0, &coarse.increments, &ccfg, &p)?;
                let (a, b) = (y.as_array(), reference.as_array());
                err += (0..4).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt() / paths as f64;
            }
            let order = prev
                .map(|e: f64| (err / e).log2())
                .map_or(String::new(), |o| format!("  order {o:.2}"));
            println!("  dt {:.1e}  error {err:.3e}{order}", fine_dt * factor as f64);
            prev = Some(err);
        }
    }
    Ok(())
}
