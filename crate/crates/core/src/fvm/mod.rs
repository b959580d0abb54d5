//! Finite-volume discretization of the surface Dean-Kawasaki equation.
//!
//! Densities live at cell centres and are densities with respect to the
//! surface measure `sqrt|G| dx`. The spatial operator is built from a backward
//! difference gradient `grad_minus` and its negative adjoint, the forward
//! difference divergence `div_plus`, with all metric factors taken at the cell
//! centre:
//!
//! ```text
//! d rho = J^-1 div+( J G^-1 grad- rho ) dt
//!       + J^-1 div+( J rho G^-1 grad- V ) dt
//!       + sqrt(2/N) J^-1 div+( sqrt(rho) J^1/2 G^-1/2 dW / sqrt(dx dy) )
//! ```
//!
//! with `J = sqrt|G|`. Because `div+ = -(grad-)^T`, the linearized operator
//! `L = div+ J G^-1 grad-` equals `-K K^T` for `K = div+ J^1/2 G^-1/2`, which
//! fixes the stationary covariance of the linearized dynamics at
//! `(rho_bar / (N dx dy)) J^-1`.

mod assemble;
mod kernels;
mod stability;
mod stencil;
mod stepper;

pub use assemble::{assemble_operators, AssembledOperators, MAX_ASSEMBLY_CELLS};
pub use kernels::{
    deterministic_rhs, em_step, interaction_field, interaction_potential, linearized_ou_step,
    noise_increment, potential_cells,
};
pub use stability::{estimate_max_dt, spectral_radius, SpectralEstimate};
pub use stencil::{div_plus, grad_minus};
pub use stepper::{FvmStepper, NoiseMode};

use crate::geometry::{Mesh, MetricGrid};
use crate::noise::{GaussianStream, StreamKey};

/// Cell-averaged density with respect to the surface measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    mesh: Mesh,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.len(), "field size must match the mesh");
        DensityField { mesh, values }
    }

    pub fn constant(mesh: Mesh, value: f64) -> Self {
        DensityField {
            mesh,
            values: vec![value; mesh.len()],
        }
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// `1 / A_S` everywhere: the noise-free steady state with unit mass.
    pub fn uniform(grid: &MetricGrid) -> Self {
        Self::constant(*grid.mesh(), 1.0 / grid.surface_area())
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.idx(i, j)]
    }

    /// `sum rho sqrt|G| dx dy`.
    pub fn mass(&self, grid: &MetricGrid) -> f64 {
        let area = grid.mesh().cell_area();
        self.values
            .iter()
            .zip(grid.samples())
            .map(|(r, m)| r * m.sqrt_det)
            .sum::<f64>()
            * area
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A 2-vector per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVectorField {
    mesh: Mesh,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl CellVectorField {
    pub fn new(mesh: Mesh, u: Vec<f64>, v: Vec<f64>) -> Self {
        assert!(
            u.len() == mesh.len() && v.len() == mesh.len(),
            "field size must match the mesh"
        );
        CellVectorField { mesh, u, v }
    }

    pub fn zeros(mesh: Mesh) -> Self {
        CellVectorField {
            mesh,
            u: vec![0.0; mesh.len()],
            v: vec![0.0; mesh.len()],
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Euclidean inner product summed over cells and components.
    pub fn dot(&self, other: &CellVectorField) -> f64 {
        let a: f64 = self.u.iter().zip(&other.u).map(|(a, b)| a * b).sum();
        let b: f64 = self.v.iter().zip(&other.v).map(|(a, b)| a * b).sum();
        a + b
    }
}

/// Independent standard normals `(Z^x, Z^y)` per cell for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub zx: Vec<f64>,
    pub zy: Vec<f64>,
}

impl NoiseDraw {
    pub fn zeros(mesh: &Mesh) -> Self {
        NoiseDraw {
            zx: vec![0.0; mesh.len()],
            zy: vec![0.0; mesh.len()],
        }
    }

    /// The draw used at `step`: stream `step`, pair index = linear cell index.
    pub fn for_step(key: &StreamKey, step: u64, mesh: &Mesh) -> Self {
        let mut stream = GaussianStream::new(key, step);
        let (zx, zy) = (0..mesh.len())
            .map(|_| {
                let [a, b] = stream.next_pair();
                (a, b)
            })
            .unzip();
        NoiseDraw { zx, zy }
    }
}
