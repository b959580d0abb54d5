//! Matrix-free building blocks, written as compositions of `grad_minus` and
//! `div_plus`. The fused `FvmStepper` must agree with these.

use super::{div_plus, grad_minus, CellVectorField, DensityField, NoiseDraw};
use crate::error::FvmError;
use crate::geometry::{MetricGrid, Sym2};
use crate::potential::{ExternalPotential, PairKernel, PotentialSpec};

fn check_shape(grid: &MetricGrid, len: usize) -> Result<(), FvmError> {
    if len != grid.mesh().len() {
        return Err(FvmError::ShapeMismatch {
            expected: grid.mesh().len(),
            got: len,
        });
    }
    Ok(())
}

/// Multiply each cell's vector by `scale[k] * matrix(k)`.
fn transform(
    vf: &CellVectorField,
    grid: &MetricGrid,
    f: impl Fn(usize) -> (f64, Sym2),
) -> CellVectorField {
    let mut out = CellVectorField::zeros(*grid.mesh());
    for k in 0..grid.mesh().len() {
        let (scale, m) = f(k);
        let w = m.apply([vf.u[k], vf.v[k]]);
        out.u[k] = scale * w[0];
        out.v[k] = scale * w[1];
    }
    out
}

fn divide_by_jacobian(mut field: DensityField, grid: &MetricGrid) -> DensityField {
    for (r, m) in field.values_mut().iter_mut().zip(grid.samples()) {
        *r /= m.sqrt_det;
    }
    field
}

/// External potential sampled at cell centres.
pub fn potential_cells(grid: &MetricGrid, external: &ExternalPotential) -> DensityField {
    let mesh = *grid.mesh();
    DensityField::new(
        mesh,
        grid.cell_centers()
            .into_iter()
            .map(|c| external.value(c))
            .collect(),
    )
}

/// Midpoint quadrature of `int U(x_ij, y) rho(y) nu(dy)` at every cell centre.
pub fn interaction_potential(
    rho: &DensityField,
    grid: &MetricGrid,
    kernel: &dyn PairKernel,
) -> DensityField {
    let centers = grid.cell_centers();
    let area = grid.mesh().cell_area();
    let weights: Vec<f64> = rho
        .values()
        .iter()
        .zip(grid.samples())
        .map(|(r, m)| r * m.sqrt_det * area)
        .collect();
    let values = centers
        .iter()
        .map(|&x| {
            centers
                .iter()
                .zip(&weights)
                .map(|(&y, w)| kernel.value(x, y) * w)
                .sum()
        })
        .collect();
    DensityField::new(*grid.mesh(), values)
}

/// Midpoint quadrature of `int G^-1(x_ij) grad_x U(x_ij, y) rho(y) nu(dy)`.
pub fn interaction_field(
    rho: &DensityField,
    grid: &MetricGrid,
    kernel: &dyn PairKernel,
) -> CellVectorField {
    let centers = grid.cell_centers();
    let area = grid.mesh().cell_area();
    let weights: Vec<f64> = rho
        .values()
        .iter()
        .zip(grid.samples())
        .map(|(r, m)| r * m.sqrt_det * area)
        .collect();
    let mut out = CellVectorField::zeros(*grid.mesh());
    for (k, &x) in centers.iter().enumerate() {
        let mut acc = [0.0; 2];
        for (&y, w) in centers.iter().zip(&weights) {
            let g = kernel.grad_x(x, y);
            acc[0] += g[0] * w;
            acc[1] += g[1] * w;
        }
        let g = grid.samples()[k].g_inv.apply(acc);
        out.u[k] = g[0];
        out.v[k] = g[1];
    }
    out
}

/// Effective cell potential: external `V` plus the mean-field pair term, or
/// `None` when both vanish.
fn effective_potential(
    rho: &DensityField,
    grid: &MetricGrid,
    potentials: &PotentialSpec,
) -> Option<DensityField> {
    let external =
        (!potentials.external.is_zero()).then(|| potential_cells(grid, &potentials.external));
    let pair = potentials
        .pair
        .as_deref()
        .map(|k| interaction_potential(rho, grid, k));
    match (external, pair) {
        (None, None) => None,
        (Some(v), None) | (None, Some(v)) => Some(v),
        (Some(mut v), Some(w)) => {
            for (a, b) in v.values_mut().iter_mut().zip(w.values()) {
                *a += b;
            }
            Some(v)
        }
    }
}

/// `J^-1 div+(J G^-1 grad- rho) + J^-1 div+(J rho G^-1 grad- V)`.
pub fn deterministic_rhs(
    rho: &DensityField,
    grid: &MetricGrid,
    potentials: &PotentialSpec,
) -> DensityField {
    let samples = grid.samples();
    let mut flux = transform(&grad_minus(rho), grid, |k| {
        (samples[k].sqrt_det, samples[k].g_inv)
    });
    if let Some(v) = effective_potential(rho, grid, potentials) {
        let r = rho.values();
        let drift = transform(&grad_minus(&v), grid, |k| {
            (samples[k].sqrt_det * r[k], samples[k].g_inv)
        });
        for k in 0..flux.u.len() {
            flux.u[k] += drift.u[k];
            flux.v[k] += drift.v[k];
        }
    }
    divide_by_jacobian(div_plus(&flux), grid)
}

/// Stochastic increment over one step:
/// `sqrt(2/N) J^-1 div+( sqrt(rho+) J^1/2 G^-1/2 sqrt(dt / (dx dy)) Z )`.
pub fn noise_increment(
    rho: &DensityField,
    grid: &MetricGrid,
    n: usize,
    dt: f64,
    draw: &NoiseDraw,
) -> DensityField {
    let samples = grid.samples();
    let scale = (2.0 / n as f64).sqrt() * (dt / grid.mesh().cell_area()).sqrt();
    let r = rho.values();
    let z = CellVectorField::new(*grid.mesh(), draw.zx.clone(), draw.zy.clone());
    let flux = transform(&z, grid, |k| {
        (
            scale * r[k].max(0.0).sqrt() * samples[k].sqrt_det.sqrt(),
            samples[k].g_inv_sqrt,
        )
    });
    divide_by_jacobian(div_plus(&flux), grid)
}

fn validate(n: usize, dt: f64) -> Result<(), FvmError> {
    if !(dt > 0.0) {
        return Err(FvmError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if n == 0 {
        return Err(FvmError::InvalidParameter(
            "particle number must be at least 1".into(),
        ));
    }
    Ok(())
}

/// One Euler-Maruyama step of the full scheme; `draw = None` switches the noise off.
pub fn em_step(
    rho: &DensityField,
    grid: &MetricGrid,
    potentials: &PotentialSpec,
    n: usize,
    dt: f64,
    draw: Option<&NoiseDraw>,
) -> Result<DensityField, FvmError> {
    validate(n, dt)?;
    check_shape(grid, rho.values().len())?;
    let rhs = deterministic_rhs(rho, grid, potentials);
    let noise = draw.map(|d| noise_increment(rho, grid, n, dt, d));
    let mut next = rho.clone();
    for (k, r) in next.values_mut().iter_mut().enumerate() {
        *r += dt * rhs.values()[k] + noise.as_ref().map_or(0.0, |w| w.values()[k]);
    }
    if !next.is_finite() {
        return Err(FvmError::Blowup { step: 0 });
    }
    Ok(next)
}

/// One step of the linearized dynamics around `rho_bar`:
/// `Z + dt J^-1 L Z + sqrt(2 rho_bar / (N dx dy)) J^-1 K sqrt(dt) xi`.
pub fn linearized_ou_step(
    z: &DensityField,
    grid: &MetricGrid,
    n: usize,
    rho_bar: f64,
    dt: f64,
    draw: Option<&NoiseDraw>,
) -> Result<DensityField, FvmError> {
    validate(n, dt)?;
    check_shape(grid, z.values().len())?;
    let rhs = deterministic_rhs(z, grid, &PotentialSpec::none());
    let mut next = z.clone();
    for (r, d) in next.values_mut().iter_mut().zip(rhs.values()) {
        *r += dt * d;
    }
    if let Some(draw) = draw {
        let samples = grid.samples();
        let scale = (2.0 * rho_bar / (n as f64 * grid.mesh().cell_area())).sqrt() * dt.sqrt();
        let xi = CellVectorField::new(*grid.mesh(), draw.zx.clone(), draw.zy.clone());
        let flux = transform(&xi, grid, |k| {
            (scale * samples[k].sqrt_det.sqrt(), samples[k].g_inv_sqrt)
        });
        let kick = divide_by_jacobian(div_plus(&flux), grid);
        for (r, d) in next.values_mut().iter_mut().zip(kick.values()) {
            *r += d;
        }
    }
    if !next.is_finite() {
        return Err(FvmError::Blowup { step: 0 });
    }
    Ok(next)
}
