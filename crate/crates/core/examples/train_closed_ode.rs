//! Trains a state-aware controller for the unmonitored qubit with the adjoint
//! ODE method. A short run; the `closed_ode` preset of `qfb train` is the
//! full-size version.
//!
//! ```sh
//! cargo run --release --example train_closed_ode
//! ```

use std::ops::ControlFlow;

use qubit_feedback::training::{evaluate, TrainConfig, TrainKind};

fn main() -> qubit_feedback::Result<()> {
    let mut cfg = TrainConfig::preset(TrainKind::ClosedOde);
    cfg.epochs = 30;
    cfg.batch_size = 32;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = qubit_feedback::training::train(&cfg, None, workers, &mut |s, _| {
        if s.epoch % 5 == 0 {
            println!(
                "epoch {:3}  loss {:.5}  mean F {:.4}",
                s.epoch, s.mean_loss, s.mean_fidelity
            );
        }
        Ok(ControlFlow::Continue(()))
    })?;
    let r = evaluate(&out.controller, 64, &cfg.solver, &cfg.phys, cfg.dynamics(), 99)?;
    println!(
        "evaluation: mean F {:.4} +- {:.4}, last 50 checkpoints {:.4}",
        r.summary.mean_fidelity, r.summary.std_fidelity, r.summary.tail_mean_fidelity
    );
    Ok(())
}
