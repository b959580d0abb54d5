use rand::Rng;

use super::{div_plus, grad_minus, DensityField};
use crate::error::FvmError;
use crate::geometry::MetricGrid;
use crate::noise::StreamKey;

const MAX_ITERATIONS: usize = 10_000;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub lambda_max: f64,
    pub iterations: usize,
    /// `|S v - lambda v| / lambda` at exit.
    pub relative_residual: f64,
}

/// Largest eigenvalue of `-J^-1 L` by power iteration.
///
/// Iterates on the symmetric similar operator `S = J^-1/2 (-L) J^-1/2`, which
/// is positive semi-definite, so the dominant eigenvalue is the one wanted.
/// Starts from the checkerboard mode, the top mode of the flat Laplacian.
pub fn spectral_radius(grid: &MetricGrid) -> Result<SpectralEstimate, FvmError> {
    let mesh = *grid.mesh();
    let samples = grid.samples();
    let inv_sqrt_j: Vec<f64> = samples.iter().map(|m| m.sqrt_det.sqrt().recip()).collect();

    let apply = |v: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = v.iter().zip(&inv_sqrt_j).map(|(a, b)| a * b).collect();
        let mut g = grad_minus(&DensityField::new(mesh, scaled));
        for (k, m) in samples.iter().enumerate() {
            let f = m.g_inv.scale(m.sqrt_det).apply([g.u[k], g.v[k]]);
            g.u[k] = f[0];
            g.v[k] = f[1];
        }
        div_plus(&g)
            .values()
            .iter()
            .zip(&inv_sqrt_j)
            .map(|(a, b)| -a * b)
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut rng = StreamKey::derive(0, "power-iteration").rng(0);
    let mut v: Vec<f64> = (0..mesh.len())
        .map(|k| {
            let (i, j) = (k % mesh.nx, k / mesh.nx);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign + 0.01 * (rng.random::<f64>() - 0.5)
        })
        .collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let w = apply(&v);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let r: f64 = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = r / lambda.abs();
        if residual < TOLERANCE {
            return Ok(SpectralEstimate {
                lambda_max: lambda,
                iterations: iteration,
                relative_residual: residual,
            });
        }
        let nw = norm(&w);
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Err(FvmError::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Explicit-Euler stability bound `2 / lambda_max` of the deterministic scheme.
pub fn estimate_max_dt(grid: &MetricGrid) -> Result<f64, FvmError> {
    Ok(2.0 / spectral_radius(grid)?.lambda_max)
}
