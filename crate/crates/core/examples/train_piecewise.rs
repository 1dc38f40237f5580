//! Trains a state-aware controller queried at checkpoints of the monitored
//! qubit, then compares it with the hand-crafted rule on fresh trajectories.
//! Reduced epochs, batch and substeps so it runs in about a minute.
//!
//! ```sh
//! cargo run --release --example train_piecewise
//! ```

use std::ops::ControlFlow;

use qubit_feedback::controller::Controller;
use qubit_feedback::sde::SolverConfig;
use qubit_feedback::training::{evaluate, train, TrainConfig, TrainKind};

fn main() -> qubit_feedback::Result<()> {
    let mut cfg = TrainConfig::preset(TrainKind::StatePiecewise);
    cfg.epochs = 300;
    cfg.batch_size = 16;
    cfg.solver = SolverConfig::new(cfg.solver.scheme, 2e-3, cfg.solver.n_checkpoints, 10);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = train(&cfg, None, workers, &mut |s, _| {
        if s.epoch % 25 == 0 {
            println!(
                "epoch {:3}  loss {:.4}  mean F {:.4}",
                s.epoch, s.mean_loss, s.mean_fidelity
            );
        }
        Ok(ControlFlow::Continue(()))
    })?;
    let hand = Controller::Handcrafted {
        omega_max: cfg.phys.omega_max,
    };
    for (name, c) in [("trained", &out.controller), ("hand-crafted", &hand)] {
        let r = evaluate(c, 256, &cfg.solver, &cfg.phys, cfg.dynamics(), 123)?;
        println!(
            "{name:12}  mean F {:.3} +- {:.3}, last 50 checkpoints {:.3}",
            r.summary.mean_fidelity, r.summary.std_fidelity, r.summary.tail_mean_fidelity
        );
    }
    Ok(())
}
