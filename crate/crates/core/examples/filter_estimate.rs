//! State estimation from the measurement record alone: the linear filter
//! applied to the drive and homodyne record of a simulated trajectory, from
//! a maximally mixed prior and from the true initial state.
//!
//! ```sh
//! cargo run --release --example filter_estimate
//! ```

use qubit_feedback::filter::{estimate_series, log_likelihood_ratio, DensityMatrix2};
use qubit_feedback::quantum::{fidelity, state_from_angles, BlochAngles, PhysParams, QubitState};
use qubit_feedback::sde::{integrate_interval_recorded, NoiseGrid, Scheme, SolverConfig};

fn main() -> qubit_feedback::Result<()> {
    let p = PhysParams::default();
    let dt = 1e-4;
    let steps = 1500;
    let cfg = SolverConfig::new(Scheme::RkMilstein, dt, 1, 1);
    let noise = NoiseGrid::generate(2, steps, dt);
    let psi0 = state_from_angles(BlochAngles::new(1.1, 2.3));
    let omega = 4.0;
    let mut states = vec![psi0];
    let mut record = vec![];
    for &dw in &noise.increments {
        let (next, dj) = integrate_interval_recorded(states.last().unwrap(), omega, &[dw], &cfg, &p)?;
        states.push(next);
        record.extend(dj);
    }
    let drives = vec![omega; steps];
    let known = estimate_series(&DensityMatrix2::pure(&psi0), &drives, &record, dt, &p)?;
    let mixed = estimate_series(&DensityMatrix2::maximally_mixed(), &drives, &record, dt, &p)?;
    println!("t       F(known prior)  F(mixed prior)  purity(mixed)");
    for k in (0..steps).step_by(150).chain([steps - 1]) {
        let s = &states[k + 1];
        println!(
            "{:.4}  {:.8}      {:.5}         {:.4}",
            (k + 1) as f64 * dt,
            known[k].fidelity(s),
            mixed[k].fidelity(s),
            mixed[k].purity()
        );
    }
    let llr = log_likelihood_ratio(&psi0, &QubitState::ground(), &drives, &record, dt, &p)?;
    println!("log-likelihood of the true initial state over |g>: {llr:+.3}");
    println!(
        "overlap of the two candidates: {:.3}",
        fidelity(&psi0, &QubitState::ground())
    );
    Ok(())
}
