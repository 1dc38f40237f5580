//! Drive policies: the hand-crafted sign rule, state-aware networks and the
//! record-driven three-segment network.

mod current;
mod mlp;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{PhysParams, QubitState, Vec4};

pub use current::{current_net_forward, CurrentCache, CurrentNetParams};
pub use mlp::{mlp_backward, mlp_forward, Head, MlpCache, MlpParams};

/// Schema tag of model checkpoint files.
pub const MODEL_SCHEMA: &str = "qubit-feedback/model/v1";

/// `+omega_max` if `<sy> > 0`, otherwise `-omega_max` (ties go negative).
pub fn handcrafted(psi: &QubitState, p: &PhysParams) -> f64 {
    handcrafted_raw(&psi.as_array(), p.omega_max)
}

pub(crate) fn handcrafted_raw(v: &Vec4, omega_max: f64) -> f64 {
    let sy = 2.0 * (v[0] * v[3] - v[1] * v[2]);
    if sy > 0.0 {
        omega_max
    } else {
        -omega_max
    }
}

/// Network input for a state-aware controller: the raw real layout.
pub fn encode_state(psi: &QubitState) -> [f64; 4] {
    psi.as_array()
}

/// What a controller sees when choosing the next drive.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerInput {
    State(Vec4),
    Record { j_tau: Vec<f64>, omega_m: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Handcrafted {
        omega_max: f64,
    },
    /// Fixed drive, independent of any input.
    Constant(f64),
    State(MlpParams),
    Current(CurrentNetParams),
}

impl Controller {
    pub fn kind(&self) -> &'static str {
        match self {
            Controller::Handcrafted { .. } => "handcrafted",
            Controller::Constant(_) => "constant",
            Controller::State(_) => "state",
            Controller::Current(_) => "current",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Controller::State(n) => n.n_params(),
            Controller::Current(n) => n.n_params(),
            _ => 0,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        match self {
            Controller::State(n) => n.params().to_vec(),
            Controller::Current(n) => n.flat(),
            _ => vec![],
        }
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        match self {
            Controller::State(n) => {
                if v.len() != n.n_params() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} values for {} parameters",
                        v.len(),
                        n.n_params()
                    )));
                }
                n.params_mut().copy_from_slice(v);
                Ok(())
            }
            Controller::Current(n) => n.set_flat(v),
            _ if v.is_empty() => Ok(()),
            _ => Err(Error::DimensionMismatch(format!(
                "{} values for a parameter-free controller",
                v.len()
            ))),
        }
    }

    /// Whether the controller reads the state (as opposed to the record).
    pub fn reads_state(&self) -> bool {
        !matches!(self, Controller::Current(_))
    }

    pub fn drive_for_state(&self, v: &Vec4) -> Result<f64> {
        match self {
            Controller::Handcrafted { omega_max } => Ok(handcrafted_raw(v, *omega_max)),
            Controller::Constant(om) => Ok(*om),
            Controller::State(n) => n.eval_scalar(v),
            Controller::Current(_) => Err(Error::Config(
                "the current-driven controller needs a record input".into(),
            )),
        }
    }

    pub fn drive(&self, input: &ControllerInput) -> Result<f64> {
        match (self, input) {
            (Controller::Current(n), ControllerInput::Record { j_tau, omega_m }) => n.eval(j_tau, omega_m),
            (Controller::Current(_), ControllerInput::State(_)) => Err(Error::Config(
                "the current-driven controller needs a record input".into(),
            )),
            (_, ControllerInput::State(v)) => self.drive_for_state(v),
            (Controller::Constant(om), _) => Ok(*om),
            _ => Err(Error::Config(format!(
                "a {} controller cannot read a record",
                self.kind()
            ))),
        }
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &ModelFile::from_controller(self))?;
        Ok(())
    }

    pub fn save_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(f))
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        file.into_controller()
    }

    pub fn load_path(path: &Path) -> Result<Self> {
        Self::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetFile {
    name: String,
    sizes: Vec<usize>,
    head: Head,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(default)]
    nets: Vec<NetFile>,
}

impl NetFile {
    fn of(name: &str, n: &MlpParams) -> Self {
        let layers = (0..n.n_layers())
            .map(|l| {
                let (w, b) = n.layer(l);
                LayerFile {
                    weights: w.chunks(n.sizes()[l]).map(|r| r.to_vec()).collect(),
                    bias: b.to_vec(),
                }
            })
            .collect();
        NetFile {
            name: name.into(),
            sizes: n.sizes().to_vec(),
            head: n.head(),
            layers,
        }
    }

    fn build(&self) -> Result<MlpParams> {
        let mut n = MlpParams::zeros(&self.sizes, self.head)?;
        if self.layers.len() != n.n_layers() {
            return Err(Error::Schema(format!(
                "net `{}` lists {} layers for sizes {:?}",
                self.name,
                self.layers.len(),
                self.sizes
            )));
        }
        for (l, lf) in self.layers.iter().enumerate() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            if lf.bias.len() != no || lf.weights.len() != no || lf.weights.iter().any(|r| r.len() != ni) {
                return Err(Error::Schema(format!(
                    "layer {l} of net `{}` has the wrong shape",
                    self.name
                )));
            }
            let (w, b) = n.layer_mut(l);
            for (o, row) in lf.weights.iter().enumerate() {
                w[o * ni..(o + 1) * ni].copy_from_slice(row);
            }
            b.copy_from_slice(&lf.bias);
        }
        if n.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("net `{}` has non-finite parameters", self.name)));
        }
        Ok(n)
    }
}

impl ModelFile {
    fn from_controller(c: &Controller) -> Self {
        let (omega, nets) = match c {
            Controller::Handcrafted { omega_max } => (Some(*omega_max), vec![]),
            Controller::Constant(om) => (Some(*om), vec![]),
            Controller::State(n) => (None, vec![NetFile::of("main", n)]),
            Controller::Current(n) => (
                None,
                vec![
                    NetFile::of("state_aware", &n.state_aware),
                    NetFile::of("action_aware", &n.action_aware),
                    NetFile::of("combo", &n.combo),
                ],
            ),
        };
        ModelFile {
            schema: MODEL_SCHEMA.into(),
            kind: c.kind().into(),
            omega,
            nets,
        }
    }

    fn into_controller(self) -> Result<Controller> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::Schema(format!(
                "expected model schema `{MODEL_SCHEMA}`, found `{}`",
                self.schema
            )));
        }
        let omega = || {
            self.omega
                .ok_or_else(|| Error::Schema(format!("{} model without a drive value", self.kind)))
        };
        match self.kind.as_str() {
            "handcrafted" => Ok(Controller::Handcrafted { omega_max: omega()? }),
            "constant" => Ok(Controller::Constant(omega()?)),
            "state" if self.nets.len() == 1 => Ok(Controller::State(self.nets[0].build()?)),
            "current" if self.nets.len() == 3 => Ok(Controller::Current(CurrentNetParams::new(
                self.nets[0].build()?,
                self.nets[1].build()?,
                self.nets[2].build()?,
            )?)),
            k => Err(Error::Schema(format!(
                "unknown model kind `{k}` with {} nets",
                self.nets.len()
            ))),
        }
    }
}
