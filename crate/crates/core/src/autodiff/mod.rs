//! Gradient paths: network backpropagation, pathwise interval sensitivities
//! with a reverse sweep over checkpoints, continuous adjoints and finite
//! differences.

mod adjoint;
mod fd;
mod pathwise;

use crate::quantum::Vec4;

pub use crate::controller::{mlp_backward, mlp_forward};
pub use adjoint::{adjoint_ode_backward, adjoint_ode_backward_with, adjoint_sde_backward, AdjointDrive, AdjointState};
pub use fd::{fd_plateau, finite_difference_oracle};
pub use pathwise::{
    chain_backprop, interval_sensitivity, rollout_with_sensitivities, IntervalSensitivity, PiecewiseKind,
};

/// Loss gradients w.r.t. every checkpoint state and drive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossGrads {
    pub d_states: Vec<Vec4>,
    pub d_drives: Vec<f64>,
}

impl LossGrads {
    pub fn zeros(n_checkpoints: usize) -> Self {
        Self {
            d_states: vec![[0.0; 4]; n_checkpoints + 1],
            d_drives: vec![0.0; n_checkpoints + 1],
        }
    }
}
