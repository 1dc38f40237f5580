//! Brownian paths, fixed-step SDE steppers, reverse-time reconstruction and
//! the adaptive ODE integrator.

mod noise;
mod reverse;
mod rk;
mod stepper;
mod trajectory;

pub use noise::{generate_noise, NoiseGrid};
pub use reverse::{integrate_reverse, REVERSE_NORM_LIMIT};
pub use rk::{step_rk54, Dp5Step, Rk54, RkOutcome, MIN_STEP};
pub use stepper::{
    integrate_interval, integrate_interval_recorded, step_euler_heun, step_milstein, Scheme, SolverConfig,
};
pub use trajectory::{read_record_csv, read_trajectory_csv, TrajectoryRecord, RECORD_SCHEMA, TRAJECTORY_SCHEMA};

pub(crate) use stepper::{step_const, step_jvp, step_with};
