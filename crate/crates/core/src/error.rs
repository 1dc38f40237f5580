use thiserror::Error;

/// Errors raised across the simulation, gradient and training layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state norm {0:e} is too small to renormalize")]
    ZeroNorm(f64),

    #[error("reverse integration diverged at t = {t}: pre-normalization norm {norm}")]
    DivergedReverse { t: f64, norm: f64 },

    #[error("adaptive step size underflow at t = {t} (dt = {dt:e})")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("degenerate measurement record: tr[D rho D^dag] = {0:e}")]
    DegenerateRecord(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("inconsistent trajectory: {0}")]
    InconsistentTrajectory(String),

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for configuration and input errors, 3 for
    /// numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ZeroNorm(_)
            | Error::DivergedReverse { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::DegenerateRecord(_)
            | Error::NonFiniteLoss { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 4,
            Error::DimensionMismatch(_)
            | Error::StaleCache(_)
            | Error::InconsistentTrajectory(_)
            | Error::Config(_)
            | Error::Schema(_)
            | Error::Json(_) => 2,
        }
    }
}
