use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Dense grid of Wiener increments for one trajectory.
///
/// Increments are drawn from a ChaCha8 stream keyed by `(seed, stream)`, so
/// trajectory `j` of a batch sees the same noise whatever order the batch
/// is evaluated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl NoiseGrid {
    pub fn generate(seed: u64, n_steps: usize, dt: f64) -> Self {
        Self::for_trajectory(seed, 0, n_steps, dt)
    }

    /// Noise for trajectory `stream` of a batch drawn under `seed`.
    pub fn for_trajectory(seed: u64, stream: u64, n_steps: usize, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let sd = dt.sqrt();
        let increments = (0..n_steps)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            seed,
            stream,
            dt,
            increments,
        }
    }

    /// Grid with every increment zero (deterministic limit).
    pub fn zeros(n_steps: usize, dt: f64) -> Self {
        Self {
            seed: 0,
            stream: 0,
            dt,
            increments: vec![0.0; n_steps],
        }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Increments of checkpoint interval `i` when each interval has `n_sub` substeps.
    pub fn interval(&self, i: usize, n_sub: usize) -> &[f64] {
        &self.increments[i * n_sub..(i + 1) * n_sub]
    }

    /// Sums consecutive groups of `factor` increments: the same Brownian path
    /// sampled on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Self {
        let increments = self.increments.chunks_exact(factor).map(|c| c.iter().sum()).collect();
        Self {
            seed: self.seed,
            stream: self.stream,
            dt: self.dt * factor as f64,
            increments,
        }
    }
}

/// Free-function form of [`NoiseGrid::generate`].
pub fn generate_noise(seed: u64, n_steps: usize, dt: f64) -> NoiseGrid {
    NoiseGrid::generate(seed, n_steps, dt)
}
