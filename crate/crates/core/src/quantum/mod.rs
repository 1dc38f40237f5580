//! Single-qubit algebra, monitored-qubit drift/diffusion and Bloch-sphere geometry.

mod physics;
mod state;

pub use physics::{
    diffusion, diffusion_jvp, diffusion_m, drift, drift_domega, drift_jvp, drift_k, ito_strat_correction,
    ito_strat_correction_jvp, reverse_drift, strat_drift, strat_drift_jvp, vjp, PhysParams,
};
pub use state::{
    expect_pauli, fidelity, fidelity_grad, homodyne_increment, renormalize, state_from_angles, stereographic,
    stereographic_radius, Axis, BlochAngles, QubitState, StereoPoint, Vec4, ZERO_NORM,
};
pub(crate) use state::{expect_pauli_raw, norm_sqr, renormalize_jvp, renormalize_raw};
