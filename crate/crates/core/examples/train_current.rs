//! A few epochs of the record-driven controller, which sees only the homodyne
//! current of the last interval and its own recent drives.
//!
//! ```sh
//! cargo run --release --example train_current
//! ```

use std::ops::ControlFlow;

use qubit_feedback::training::{train, TrainConfig, TrainKind};

fn main() -> qubit_feedback::Result<()> {
    let mut cfg = TrainConfig::preset(TrainKind::CurrentRecord);
    cfg.epochs = 10;
    cfg.batch_size = 16;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = train(&cfg, None, workers, &mut |s, _| {
        println!(
            "epoch {:2}  loss {:.4}  mean F {:.4}  |grad| {:.3e}",
            s.epoch, s.mean_loss, s.mean_fidelity, s.grad_norm
        );
        Ok(ControlFlow::Continue(()))
    })?;
    println!("{} parameters trained", out.controller.n_params());
    Ok(())
}
