use serde::{Deserialize, Serialize};

use crate::controller::{Controller, CurrentNetParams, Head, MlpParams};
use crate::error::{Error, Result};
use crate::quantum::PhysParams;
use crate::sde::{Scheme, SolverConfig};

use super::LossConfig;

/// Which training pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainKind {
    /// State-aware network inside the drift, continuous adjoint SDE.
    StateContinuous,
    /// State-aware network queried at checkpoints, pathwise sensitivities.
    StatePiecewise,
    /// Record-driven network queried at checkpoints, pathwise sensitivities.
    CurrentRecord,
    /// Unmonitored qubit, continuous feedback, adjoint ODE.
    ClosedOde,
}

impl TrainKind {
    pub fn dynamics(self, ode_tol: f64) -> Dynamics {
        match self {
            TrainKind::StateContinuous => Dynamics::Continuous,
            TrainKind::StatePiecewise | TrainKind::CurrentRecord => Dynamics::Piecewise,
            TrainKind::ClosedOde => Dynamics::ClosedOde { tol: ode_tol },
        }
    }
}

/// How trajectories are generated for a controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    /// Monitored qubit, drive held between checkpoints.
    Piecewise,
    /// Monitored qubit, drive re-evaluated at every solver stage.
    Continuous,
    /// Unmonitored qubit with an adaptive ODE solver.
    ClosedOde { tol: f64 },
}

/// Network shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    State {
        sizes: Vec<usize>,
    },
    Current {
        state_aware: Vec<usize>,
        action_aware: Vec<usize>,
        combo: Vec<usize>,
    },
}

impl Architecture {
    /// Freshly initialized controller with a softsign head bounded by `omega_max`.
    pub fn init(&self, omega_max: f64, seed: u64) -> Result<Controller> {
        Ok(match self {
            Architecture::State { sizes } => {
                Controller::State(MlpParams::init(sizes, Head::Softsign { scale: omega_max }, seed)?)
            }
            Architecture::Current {
                state_aware,
                action_aware,
                combo,
            } => Controller::Current(CurrentNetParams::init(
                state_aware,
                action_aware,
                combo,
                omega_max,
                seed,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: TrainKind,
    pub architecture: Architecture,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Model checkpoint period in epochs; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
    pub solver: SolverConfig,
    pub phys: PhysParams,
    pub loss: LossConfig,
    /// Tolerance of the adaptive closed-system solver.
    #[serde(default = "default_ode_tol")]
    pub ode_tol: f64,
}

fn default_ode_tol() -> f64 {
    1e-6
}

impl TrainConfig {
    /// Reference settings for each pipeline.
    pub fn preset(kind: TrainKind) -> Self {
        let phys = PhysParams::default();
        match kind {
            TrainKind::StateContinuous => Self {
                kind,
                architecture: Architecture::State {
                    sizes: vec![4, 256, 64, 1],
                },
                learning_rate: 0.0015,
                batch_size: 64,
                epochs: 1000,
                seed: 0,
                checkpoint_every: 100,
                solver: SolverConfig::new(Scheme::EulerHeun, 1e-4, 150, 200),
                phys,
                loss: LossConfig::new(1.0, 0.0, 0.0),
                ode_tol: default_ode_tol(),
            },
            TrainKind::StatePiecewise => Self {
                kind,
                architecture: Architecture::State {
                    sizes: vec![4, 256, 128, 64, 1],
                },
                learning_rate: 1e-4,
                batch_size: 64,
                epochs: 3000,
                seed: 0,
                checkpoint_every: 100,
                solver: SolverConfig::new(Scheme::RkMilstein, 1e-3, 150, 20),
                phys,
                loss: LossConfig::new(0.8, 1.8, 1e-3),
                ode_tol: default_ode_tol(),
            },
            TrainKind::CurrentRecord => Self {
                kind,
                architecture: Architecture::Current {
                    state_aware: vec![80, 256, 256, 128],
                    action_aware: vec![8, 128, 128],
                    combo: vec![256, 64, 32, 1],
                },
                learning_rate: 1e-4,
                batch_size: 64,
                epochs: 14000,
                seed: 0,
                checkpoint_every: 500,
                solver: SolverConfig::new(Scheme::RkMilstein, 2.5e-4, 150, 80),
                phys,
                loss: LossConfig::new(1.2, 0.8, 1e-3),
                ode_tol: default_ode_tol(),
            },
            TrainKind::ClosedOde => Self {
                kind,
                architecture: Architecture::State {
                    sizes: vec![4, 256, 64, 1],
                },
                learning_rate: 0.0015,
                batch_size: 256,
                epochs: 400,
                seed: 0,
                checkpoint_every: 50,
                solver: SolverConfig::new(Scheme::RkMilstein, 1e-3, 150, 20),
                phys: phys.closed(),
                loss: LossConfig::new(1.0, 0.0, 0.0),
                ode_tol: default_ode_tol(),
            },
        }
    }

    pub fn dynamics(&self) -> Dynamics {
        self.kind.dynamics(self.ode_tol)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.phys.validate()?;
        self.loss.validate()?;
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".into()));
        }
        if !(self.ode_tol > 0.0) {
            return Err(Error::Config(format!("ode_tol = {}", self.ode_tol)));
        }
        match (&self.architecture, self.kind) {
            (Architecture::Current { state_aware, .. }, TrainKind::CurrentRecord) => {
                if state_aware.first() != Some(&self.solver.n_sub) {
                    return Err(Error::Config(format!(
                        "record network reads {:?} samples but intervals have {} substeps",
                        state_aware.first(),
                        self.solver.n_sub
                    )));
                }
            }
            (Architecture::State { sizes }, k) if k != TrainKind::CurrentRecord => {
                if sizes.first() != Some(&4) || sizes.last() != Some(&1) {
                    return Err(Error::Config(format!(
                        "state network must map 4 inputs to 1 output, got {sizes:?}"
                    )));
                }
            }
            (a, k) => return Err(Error::Config(format!("architecture {a:?} does not fit {k:?}"))),
        }
        Ok(())
    }
}
