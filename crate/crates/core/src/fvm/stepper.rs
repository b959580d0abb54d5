use std::sync::Arc;

use super::kernels::{interaction_potential, potential_cells};
use super::{grad_minus, DensityField};
use crate::error::FvmError;
use crate::geometry::{Mesh, MetricGrid, Sym2};
use crate::noise::{GaussianStream, StreamKey};
use crate::potential::{PairKernel, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    Off,
    /// Dean-Kawasaki noise with amplitude `sqrt(max(rho, 0))`.
    Multiplicative {
        key: StreamKey,
    },
    /// Noise frozen at the mean-field density: the linearized dynamics.
    Linearized {
        key: StreamKey,
        rho_bar: f64,
    },
}

/// Fused Euler-Maruyama stepper with precomputed per-cell coefficients.
///
/// Step `n` draws its Gaussians from stream `n` of the noise key, one pair per
/// cell in linear index order, so `NoiseDraw::for_step(key, n, mesh)` is the
/// draw that step used.
pub struct FvmStepper {
    grid: MetricGrid,
    mesh: Mesh,
    dt: f64,
    inv_j: Vec<f64>,
    /// `dt J G^-1`
    diffusion: Vec<Sym2>,
    /// `sqrt(2/N) sqrt(dt / (dx dy)) J^1/2 G^-1/2`
    noise_matrix: Vec<Sym2>,
    /// `dt J G^-1 grad- V` for a fixed external potential.
    potential_flux: Option<(Vec<f64>, Vec<f64>)>,
    external_cells: Option<DensityField>,
    pair: Option<Arc<dyn PairKernel>>,
    noise: NoiseMode,
    step: u64,
    negative_cells: u64,
    flux_u: Vec<f64>,
    flux_v: Vec<f64>,
}

impl FvmStepper {
    pub fn new(
        grid: &MetricGrid,
        potentials: &PotentialSpec,
        n: usize,
        dt: f64,
        noise: NoiseMode,
    ) -> Result<Self, FvmError> {
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
        let mesh = *grid.mesh();
        let samples = grid.samples();
        let noise_scale = (2.0 / n as f64).sqrt() * (dt / mesh.cell_area()).sqrt();
        let external_cells =
            (!potentials.external.is_zero()).then(|| potential_cells(grid, &potentials.external));
        let mut stepper = FvmStepper {
            grid: grid.clone(),
            mesh,
            dt,
            inv_j: samples.iter().map(|m| 1.0 / m.sqrt_det).collect(),
            diffusion: samples
                .iter()
                .map(|m| m.g_inv.scale(dt * m.sqrt_det))
                .collect(),
            noise_matrix: samples
                .iter()
                .map(|m| m.g_inv_sqrt.scale(noise_scale * m.sqrt_det.sqrt()))
                .collect(),
            potential_flux: None,
            external_cells,
            pair: potentials.pair.clone(),
            noise,
            step: 0,
            negative_cells: 0,
            flux_u: vec![0.0; mesh.len()],
            flux_v: vec![0.0; mesh.len()],
        };
        if stepper.pair.is_none() {
            stepper.potential_flux = stepper
                .external_cells
                .as_ref()
                .map(|v| stepper.flux_of_potential(v));
        }
        Ok(stepper)
    }

    fn flux_of_potential(&self, v: &DensityField) -> (Vec<f64>, Vec<f64>) {
        let g = grad_minus(v);
        let mut u = vec![0.0; self.mesh.len()];
        let mut w = vec![0.0; self.mesh.len()];
        for k in 0..self.mesh.len() {
            let f = self.diffusion[k].apply([g.u[k], g.v[k]]);
            u[k] = f[0];
            w[k] = f[1];
        }
        (u, w)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &MetricGrid {
        &self.grid
    }

    /// Number of steps taken so far; also the index of the next noise stream.
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Cells clipped to zero inside the noise amplitude, summed over all steps.
    pub fn negative_cells(&self) -> u64 {
        self.negative_cells
    }

    pub fn step(&mut self, rho: &mut DensityField) -> Result<(), FvmError> {
        if rho.values().len() != self.mesh.len() {
            return Err(FvmError::ShapeMismatch {
                expected: self.mesh.len(),
                got: rho.values().len(),
            });
        }
        let pair_flux = match (&self.pair, &self.external_cells) {
            (Some(kernel), external) => {
                let mut v = interaction_potential(rho, &self.grid, kernel.as_ref());
                if let Some(ext) = external {
                    for (a, b) in v.values_mut().iter_mut().zip(ext.values()) {
                        *a += b;
                    }
                }
                Some(self.flux_of_potential(&v))
            }
            (None, _) => None,
        };
        let potential_flux = pair_flux.as_ref().or(self.potential_flux.as_ref());

        let m = self.mesh;
        let (nx, ny) = (m.nx, m.ny);
        let r = rho.values_mut();
        let mut stream = match self.noise {
            NoiseMode::Off => None,
            NoiseMode::Multiplicative { key } | NoiseMode::Linearized { key, .. } => {
                Some(GaussianStream::new(&key, self.step))
            }
        };
        let mut negative = 0u64;

        for j in 0..ny {
            let jm = if j == 0 { ny - 1 } else { j - 1 };
            for i in 0..nx {
                let im = if i == 0 { nx - 1 } else { i - 1 };
                let k = j * nx + i;
                let gx = (r[k] - r[j * nx + im]) / m.dx;
                let gy = (r[k] - r[jm * nx + i]) / m.dy;
                let [mut fu, mut fv] = self.diffusion[k].apply([gx, gy]);
                if let Some((pu, pv)) = potential_flux {
                    fu += r[k] * pu[k];
                    fv += r[k] * pv[k];
                }
                if let Some(s) = stream.as_mut() {
                    let z = s.next_pair();
                    let amp = match self.noise {
                        NoiseMode::Linearized { rho_bar, .. } => rho_bar.sqrt(),
                        _ => {
                            if r[k] < 0.0 {
                                negative += 1;
                                0.0
                            } else {
                                r[k].sqrt()
                            }
                        }
                    };
                    let w = self.noise_matrix[k].apply(z);
                    fu += amp * w[0];
                    fv += amp * w[1];
                }
                self.flux_u[k] = fu;
                self.flux_v[k] = fv;
            }
        }

        let mut check = 0.0;
        for j in 0..ny {
            let jp = if j + 1 == ny { 0 } else { j + 1 };
            for i in 0..nx {
                let ip = if i + 1 == nx { 0 } else { i + 1 };
                let k = j * nx + i;
                let div = (self.flux_u[j * nx + ip] - self.flux_u[k]) / m.dx
                    + (self.flux_v[jp * nx + i] - self.flux_v[k]) / m.dy;
                r[k] += self.inv_j[k] * div;
                check += r[k];
            }
        }
        self.step += 1;
        self.negative_cells += negative;
        if !check.is_finite() {
            return Err(FvmError::Blowup { step: self.step });
        }
        Ok(())
    }
}
