//! Loss, optimizer, batch sampling, the training pipelines and evaluation.

mod adam;
mod config;
mod evaluate;
mod loss;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quantum::{state_from_angles, BlochAngles, QubitState};

pub use adam::{adam_step, AdamState};
pub use config::{Architecture, Dynamics, TrainConfig, TrainKind};
pub use evaluate::{evaluate, simulate, EvalReport, EvalSummary};
pub use loss::{loss_eval, LossConfig, TAIL_CHECKPOINTS};
pub use train::{train, trajectory_gradient, EpochStats, TrainOutcome, TrajectoryGradient};

/// Initial states with `theta ~ U[0, pi]`, `phi ~ U[0, 2 pi)`.
pub fn sample_initial_batch<R: Rng + ?Sized>(rng: &mut R, b: usize) -> Vec<QubitState> {
    (0..b)
        .map(|_| {
            let theta = rng.random_range(0.0..=std::f64::consts::PI);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            state_from_angles(BlochAngles::new(theta, phi))
        })
        .collect()
}

/// Independent 64-bit seed for `(master, tag, index)`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Target of every objective: the excited state.
pub fn target_state() -> QubitState {
    QubitState::excited()
}

pub(crate) fn batch_rng(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}
