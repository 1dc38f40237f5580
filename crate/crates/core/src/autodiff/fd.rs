//! Central finite differences at frozen noise.

use crate::error::Result;

/// Central differences of `loss` at `theta` along each coordinate in `coords`.
pub fn finite_difference_oracle(
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    coords: &[usize],
    eps: f64,
) -> Result<Vec<f64>> {
    let mut x = theta.to_vec();
    coords
        .iter()
        .map(|&k| {
            x[k] = theta[k] + eps;
            let a = loss(&x)?;
            x[k] = theta[k] - eps;
            let b = loss(&x)?;
            x[k] = theta[k];
            Ok((a - b) / (2.0 * eps))
        })
        .collect()
}

/// Runs [`finite_difference_oracle`] for every step in `eps_list` and, per
/// coordinate, returns the mean of the two consecutive estimates that agree
/// best (the plateau of the sweep).
pub fn fd_plateau(
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    coords: &[usize],
    eps_list: &[f64],
) -> Result<Vec<f64>> {
    let sweeps: Vec<Vec<f64>> = eps_list
        .iter()
        .map(|&e| finite_difference_oracle(loss, theta, coords, e))
        .collect::<Result<_>>()?;
    Ok((0..coords.len())
        .map(|j| {
            if sweeps.len() == 1 {
                return sweeps[0][j];
            }
            let best = (0..sweeps.len() - 1)
                .min_by(|&a, &b| {
                    let da = (sweeps[a][j] - sweeps[a + 1][j]).abs();
                    let db = (sweeps[b][j] - sweeps[b + 1][j]).abs();
                    da.total_cmp(&db)
                })
                .unwrap();
            0.5 * (sweeps[best][j] + sweeps[best + 1][j])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_and_linear() {
        let mut q = |x: &[f64]| Ok(x[0] * x[0] + 3.0 * x[1]);
        let g = finite_difference_oracle(&mut q, &[2.0, -1.0], &[0, 1], 1e-3).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-9);
        assert!((g[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn plateau_picks_consistent_pair() {
        // roundoff-like noise at tiny eps, truncation error at large eps
        let mut f = |x: &[f64]| Ok(x[0].sin() + if (x[0] * 1e9).fract().abs() > 0.5 { 1e-12 } else { 0.0 });
        let g = fd_plateau(&mut f, &[0.3], &[0], &[1e-1, 1e-3, 1e-4, 1e-5]).unwrap();
        assert!((g[0] - 0.3f64.cos()).abs() < 1e-6);
    }
}
