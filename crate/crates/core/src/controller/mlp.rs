//! Fully connected networks with rectifier hidden layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// `scale * z / (1 + |z|)`.
    Softsign { scale: f64 },
    /// Rectifier, used by the inner segments of the current-driven network.
    Relu,
}

/// Weights and biases of a fully connected network, stored flat.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; its weight
/// matrix is row-major `out x in`, followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    head: Head,
    params: Vec<f64>,
}

/// Per-layer inputs and pre-activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    const L: usize = 16;
    let mut acc = [0.0; L];
    let ca = a.chunks_exact(L);
    let cb = b.chunks_exact(L);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..L {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let mut w = L;
    while w > 1 {
        w /= 2;
        for k in 0..w {
            acc[k] += acc[k + w];
        }
    }
    acc[0] + tail
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn n_params_of(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    pub fn zeros(sizes: &[usize], head: Head) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::DimensionMismatch(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            head,
            params: vec![0.0; n_params_of(sizes)],
        })
    }

    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn init(sizes: &[usize], head: Head, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(sizes, head, &mut rng)
    }

    pub fn init_with<R: Rng>(sizes: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, head)?;
        for l in 0..net.n_layers() {
            let (ni, no) = (sizes[l], sizes[l + 1]);
            let lim = (6.0 / (ni + no) as f64).sqrt();
            let off = net.offset(l);
            for w in &mut net.params[off..off + ni * no] {
                *w = rng.random_range(-lim..lim);
            }
        }
        Ok(net)
    }

    pub fn from_parts(sizes: &[usize], head: Head, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, head)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for layer sizes {sizes:?}",
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn set_head(&mut self, head: Head) {
        self.head = head;
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_in(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Start of layer `l` in the flat parameter vector.
    pub fn offset(&self, l: usize) -> usize {
        n_params_of(&self.sizes[..=l])
    }

    /// Weights (row-major `out x in`) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offset(l);
        (
            &self.params[off..off + ni * no],
            &self.params[off + ni * no..off + ni * no + no],
        )
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offset(l);
        let (w, b) = self.params[off..off + ni * no + no].split_at_mut(ni * no);
        (w, b)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_in() {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} for a {}-input net",
                x.len(),
                self.n_in()
            )));
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let ni = self.sizes[l];
        b.iter()
            .enumerate()
            .map(|(o, bo)| bo + dot(&w[o * ni..(o + 1) * ni], x))
            .collect()
    }

    fn activate(&self, l: usize, z: &[f64]) -> Vec<f64> {
        if l + 1 < self.n_layers() {
            return z.iter().map(|v| v.max(0.0)).collect();
        }
        match self.head {
            Head::Softsign { scale } => z.iter().map(|v| scale * v / (1.0 + v.abs())).collect(),
            Head::Relu => z.iter().map(|v| v.max(0.0)).collect(),
        }
    }

    /// Output without keeping a cache.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let z = self.affine(l, &a);
            a = self.activate(l, &z);
        }
        Ok(a)
    }

    /// Output of a single-output net.
    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?[0])
    }

    /// Output of every row of `xs`, each evaluated independently.
    pub fn eval_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.eval(x)).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let z = self.affine(l, &a);
            let next = self.activate(l, &z);
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((a, MlpCache { inputs, pre }))
    }

    /// Backward pass for upstream gradient `d_out`. Parameter gradients are
    /// added into `grad` when given; returns the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: Option<&mut [f64]>) -> Result<Vec<f64>> {
        let nl = self.n_layers();
        let consistent = cache.pre.len() == nl
            && cache.inputs.len() == nl
            && (0..nl).all(|l| cache.inputs[l].len() == self.sizes[l] && cache.pre[l].len() == self.sizes[l + 1])
            && d_out.len() == self.n_out();
        if !consistent {
            return Err(Error::StaleCache(format!(
                "cache does not match a net of sizes {:?}",
                self.sizes
            )));
        }
        if let Some(g) = &grad {
            if g.len() != self.params.len() {
                return Err(Error::DimensionMismatch(format!(
                    "gradient buffer of length {} for {} parameters",
                    g.len(),
                    self.params.len()
                )));
            }
        }
        let mut grad = grad;
        let mut dz: Vec<f64> = match self.head {
            Head::Softsign { scale } => cache.pre[nl - 1]
                .iter()
                .zip(d_out)
                .map(|(z, d)| d * scale / (1.0 + z.abs()).powi(2))
                .collect(),
            Head::Relu => relu_mask(&cache.pre[nl - 1], d_out),
        };
        for l in (0..nl).rev() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let x = &cache.inputs[l];
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g[off..off + ni * no + no].split_at_mut(ni * no);
                for o in 0..no {
                    if dz[o] != 0.0 {
                        axpy(dz[o], x, &mut gw[o * ni..(o + 1) * ni]);
                        gb[o] += dz[o];
                    }
                }
            }
            let w = &self.params[off..off + ni * no];
            let mut dx = vec![0.0; ni];
            for o in 0..no {
                if dz[o] != 0.0 {
                    axpy(dz[o], &w[o * ni..(o + 1) * ni], &mut dx);
                }
            }
            dz = if l > 0 { relu_mask(&cache.pre[l - 1], &dx) } else { dx };
        }
        Ok(dz)
    }
}

/// Rectifier derivative, with subgradient 0 at 0.
fn relu_mask(z: &[f64], d: &[f64]) -> Vec<f64> {
    z.iter().zip(d).map(|(z, d)| if *z > 0.0 { *d } else { 0.0 }).collect()
}

/// Drive and cache of a single-output net.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<(f64, MlpCache)> {
    if params.n_out() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected one output, net has {}",
            params.n_out()
        )));
    }
    let (out, cache) = params.forward(input)?;
    Ok((out[0], cache))
}

/// Gradients of a single-output net's drive w.r.t. its parameters and input,
/// scaled by `d_omega`.
pub fn mlp_backward(params: &MlpParams, cache: &MlpCache, d_omega: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g = vec![0.0; params.n_params()];
    let dx = params.backward(cache, &[d_omega], Some(&mut g))?;
    Ok((g, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn net() -> MlpParams {
        MlpParams::init(&[4, 16, 8, 1], Head::Softsign { scale: 10.0 }, 3).unwrap()
    }

    // straight-line evaluation without the flat layout helpers
    fn reference(net: &MlpParams, x: &[f64]) -> f64 {
        let p = net.params();
        let s = net.sizes();
        let mut a = x.to_vec();
        let mut off = 0;
        for l in 0..s.len() - 1 {
            let mut z = vec![0.0; s[l + 1]];
            for o in 0..s[l + 1] {
                let mut acc = p[off + s[l] * s[l + 1] + o];
                for i in 0..s[l] {
                    acc += p[off + o * s[l] + i] * a[i];
                }
                z[o] = acc;
            }
            off += s[l] * s[l + 1] + s[l + 1];
            a = if l + 2 < s.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z
            };
        }
        10.0 * a[0] / (1.0 + a[0].abs())
    }

    #[test]
    fn zero_params_give_zero_drive() {
        let n = MlpParams::zeros(&[4, 8, 1], Head::Softsign { scale: 10.0 }).unwrap();
        assert_eq!(mlp_forward(&n, &[0.3, 0.1, -0.2, 0.9]).unwrap().0, 0.0);
    }

    #[test]
    fn saturates_at_bound() {
        let mut n = MlpParams::zeros(&[1, 1], Head::Softsign { scale: 10.0 }).unwrap();
        n.params_mut()[1] = 1e12;
        let om = mlp_forward(&n, &[0.0]).unwrap().0;
        assert!(om < 10.0 && om > 10.0 - 1e-9);
    }

    #[test]
    fn matches_reference_evaluation() {
        let n = net();
        for k in 0..10 {
            let x = [0.1 * k as f64, -0.3, 0.5 - 0.07 * k as f64, 0.2];
            let (a, _) = mlp_forward(&n, &x).unwrap();
            assert!((a - reference(&n, &x)).abs() < 1e-12);
            assert_eq!(a, n.eval_scalar(&x).unwrap());
        }
    }

    #[test]
    fn batch_rows_are_bit_identical() {
        let n = net();
        let xs: Vec<Vec<f64>> = (0..7)
            .map(|k| vec![0.1 * k as f64, 0.2, -0.05 * k as f64, 0.4])
            .collect();
        let batch = n.eval_batch(&xs).unwrap();
        for (x, y) in xs.iter().zip(&batch) {
            assert_eq!(y[0].to_bits(), n.eval_scalar(x).unwrap().to_bits());
        }
        assert_eq!(n.eval_batch(&xs[2..3]).unwrap()[0], batch[2]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let n = net();
        let (_, c) = mlp_forward(&n, &[0.3, 0.1, -0.2, 0.9]).unwrap();
        let (g, dx) = mlp_backward(&n, &c, 0.0).unwrap();
        assert!(g.iter().chain(&dx).all(|v| *v == 0.0));
    }

    #[test]
    fn single_linear_layer_input_gradient() {
        let mut n = MlpParams::zeros(&[3, 1], Head::Softsign { scale: 2.0 }).unwrap();
        n.params_mut()[..3].copy_from_slice(&[0.5, -1.0, 2.0]);
        let x = [0.0, 0.0, 0.0];
        let (_, c) = mlp_forward(&n, &x).unwrap();
        let (_, dx) = mlp_backward(&n, &c, 1.0).unwrap();
        // softsign slope at 0 is the scale
        assert_eq!(dx, vec![1.0, -2.0, 4.0]);
    }

    #[test]
    fn gradients_match_central_differences() {
        let n = net();
        let x = [0.3, -0.4, 0.8, 0.1];
        let (_, c) = mlp_forward(&n, &x).unwrap();
        let (g, dx) = mlp_backward(&n, &c, 1.0).unwrap();
        let h = 1e-6;
        for k in 0..n.n_params() {
            let mut a = n.clone();
            a.params_mut()[k] += h;
            let mut b = n.clone();
            b.params_mut()[k] -= h;
            let fd = (a.eval_scalar(&x).unwrap() - b.eval_scalar(&x).unwrap()) / (2.0 * h);
            let err = (fd - g[k]).abs() / g[k].abs().max(1e-3);
            assert!(err < 1e-6, "param {k}: {fd} vs {}", g[k]);
        }
        for i in 0..4 {
            let (mut a, mut b) = (x, x);
            a[i] += h;
            b[i] -= h;
            let fd = (n.eval_scalar(&a).unwrap() - n.eval_scalar(&b).unwrap()) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn stale_cache_is_detected() {
        let n = net();
        let other = MlpParams::init(&[4, 12, 1], Head::Softsign { scale: 10.0 }, 1).unwrap();
        let (_, c) = mlp_forward(&other, &[0.0; 4]).unwrap();
        assert!(matches!(mlp_backward(&n, &c, 1.0), Err(Error::StaleCache(_))));
        assert!(matches!(mlp_forward(&n, &[0.0; 3]), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn output_is_bounded(seed in 0u64..500, x in proptest::collection::vec(-50.0f64..50.0, 4)) {
            let n = MlpParams::init(&[4, 16, 1], Head::Softsign { scale: 10.0 }, seed).unwrap();
            prop_assert!(n.eval_scalar(&x).unwrap().abs() < 10.0);
        }

        #[test]
        fn affine_within_activation_region(seed in 0u64..200, t in 0.0f64..1.0) {
            let n = MlpParams::init(&[4, 16, 8, 1], Head::Softsign { scale: 10.0 }, seed).unwrap();
            let x0 = [0.3, -0.2, 0.5, 0.1];
            let x1 = [0.3001, -0.2, 0.5002, 0.1];
            let pre = |x: &[f64]| {
                let (_, c) = n.forward(x).unwrap();
                let hidden = &c.pre[..c.pre.len() - 1];
                let masks: Vec<Vec<bool>> = hidden.iter().map(|z| z.iter().map(|v| *v > 0.0).collect()).collect();
                (c.pre.last().unwrap()[0], masks)
            };
            let (z0, m0) = pre(&x0);
            let (z1, m1) = pre(&x1);
            let xt: Vec<f64> = (0..4).map(|i| x0[i] + t * (x1[i] - x0[i])).collect();
            let (zt, mt) = pre(&xt);
            prop_assume!(m0 == m1 && m0 == mt);
            prop_assert!((zt - (z0 + t * (z1 - z0))).abs() < 1e-12);
        }
    }
}
