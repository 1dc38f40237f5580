//! Three-segment network driven by the homodyne record.
//!
//! A state-aware segment reads the last interval's current record, an
//! action-aware segment reads the most recent drives; their rectified outputs
//! are concatenated and fed to a combination segment with a softsign head.

use crate::error::{Error, Result};

use super::mlp::{Head, MlpCache, MlpParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentNetParams {
    pub state_aware: MlpParams,
    pub action_aware: MlpParams,
    pub combo: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentCache {
    state_aware: MlpCache,
    action_aware: MlpCache,
    combo: MlpCache,
}

impl CurrentNetParams {
    /// Checks the concatenation width and the segment heads.
    pub fn new(state_aware: MlpParams, action_aware: MlpParams, combo: MlpParams) -> Result<Self> {
        if state_aware.n_out() + action_aware.n_out() != combo.n_in() || combo.n_out() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "segments of widths {} + {} cannot feed a combination net {:?}",
                state_aware.n_out(),
                action_aware.n_out(),
                combo.sizes()
            )));
        }
        if state_aware.head() != Head::Relu || action_aware.head() != Head::Relu {
            return Err(Error::Config("inner segments must use rectifier outputs".into()));
        }
        if !matches!(combo.head(), Head::Softsign { .. }) {
            return Err(Error::Config("combination net must use a softsign head".into()));
        }
        Ok(Self {
            state_aware,
            action_aware,
            combo,
        })
    }

    /// Seeded initialization of all three segments.
    pub fn init(sa: &[usize], aa: &[usize], combo: &[usize], omega_max: f64, seed: u64) -> Result<Self> {
        Self::new(
            MlpParams::init(sa, Head::Relu, seed)?,
            MlpParams::init(aa, Head::Relu, seed.wrapping_add(1))?,
            MlpParams::init(combo, Head::Softsign { scale: omega_max }, seed.wrapping_add(2))?,
        )
    }

    pub fn record_len(&self) -> usize {
        self.state_aware.n_in()
    }

    pub fn memory_len(&self) -> usize {
        self.action_aware.n_in()
    }

    pub fn n_params(&self) -> usize {
        self.state_aware.n_params() + self.action_aware.n_params() + self.combo.n_params()
    }

    /// Parameters flattened in segment order: state-aware, action-aware, combination.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(self.state_aware.params());
        v.extend_from_slice(self.action_aware.params());
        v.extend_from_slice(self.combo.params());
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                v.len(),
                self.n_params()
            )));
        }
        let (a, rest) = v.split_at(self.state_aware.n_params());
        let (b, c) = rest.split_at(self.action_aware.n_params());
        self.state_aware.params_mut().copy_from_slice(a);
        self.action_aware.params_mut().copy_from_slice(b);
        self.combo.params_mut().copy_from_slice(c);
        Ok(())
    }

    fn concat(&self, j_tau: &[f64], omega_m: &[f64]) -> Result<(Vec<f64>, MlpCache, MlpCache)> {
        let (s, cs) = self.state_aware.forward(j_tau)?;
        let (a, ca) = self.action_aware.forward(omega_m)?;
        let mut x = s;
        x.extend_from_slice(&a);
        Ok((x, cs, ca))
    }

    pub fn eval(&self, j_tau: &[f64], omega_m: &[f64]) -> Result<f64> {
        let (x, _, _) = self.concat(j_tau, omega_m)?;
        self.combo.eval_scalar(&x)
    }

    pub fn forward(&self, j_tau: &[f64], omega_m: &[f64]) -> Result<(f64, CurrentCache)> {
        let (x, cs, ca) = self.concat(j_tau, omega_m)?;
        let (out, cc) = self.combo.forward(&x)?;
        Ok((
            out[0],
            CurrentCache {
                state_aware: cs,
                action_aware: ca,
                combo: cc,
            },
        ))
    }

    /// Gradient w.r.t. the record and the drive memory; parameter gradients
    /// (flat segment order) are added into `grad` when given.
    pub fn backward(
        &self,
        cache: &CurrentCache,
        d_omega: f64,
        grad: Option<&mut [f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (ns, na) = (self.state_aware.n_params(), self.action_aware.n_params());
        let (gs, ga, gc) = match grad {
            Some(g) => {
                if g.len() != self.n_params() {
                    return Err(Error::DimensionMismatch(format!(
                        "gradient buffer of length {} for {} parameters",
                        g.len(),
                        self.n_params()
                    )));
                }
                let (a, rest) = g.split_at_mut(ns);
                let (b, c) = rest.split_at_mut(na);
                (Some(a), Some(b), Some(c))
            }
            None => (None, None, None),
        };
        let dx = self.combo.backward(&cache.combo, &[d_omega], gc)?;
        let (ds, da) = dx.split_at(self.state_aware.n_out());
        let dj = self.state_aware.backward(&cache.state_aware, ds, gs)?;
        let dm = self.action_aware.backward(&cache.action_aware, da, ga)?;
        Ok((dj, dm))
    }
}

/// Drive and cache of the current-driven network.
pub fn current_net_forward(params: &CurrentNetParams, j_tau: &[f64], omega_m: &[f64]) -> Result<(f64, CurrentCache)> {
    params.forward(j_tau, omega_m)
}
