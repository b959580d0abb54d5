use nalgebra::{DMatrix, DVector};

use super::{div_plus, grad_minus, CellVectorField, DensityField};
use crate::error::FvmError;
use crate::geometry::MetricGrid;

/// Dense assembly is refused above 64x64 cells.
pub const MAX_ASSEMBLY_CELLS: usize = 64 * 64;

/// Dense operators of the linearized scheme.
///
/// Vectors in the `2IJ` noise space are ordered `[W^x (all cells), W^y (all cells)]`.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    /// `L = div+ J G^-1 grad-`, `IJ x IJ`.
    pub l: DMatrix<f64>,
    /// `K = div+ J^1/2 G^-1/2`, `IJ x 2IJ`.
    pub k: DMatrix<f64>,
    /// Diagonal of `J = sqrt|G|`.
    pub j_diag: DVector<f64>,
}

/// Assemble `L` and `K` column by column by applying the matrix-free kernels to unit vectors.
pub fn assemble_operators(grid: &MetricGrid) -> Result<AssembledOperators, FvmError> {
    let mesh = *grid.mesh();
    let n = mesh.len();
    if n > MAX_ASSEMBLY_CELLS {
        return Err(FvmError::TooLargeForAssembly {
            nx: mesh.nx,
            ny: mesh.ny,
            limit: MAX_ASSEMBLY_CELLS,
        });
    }
    let samples = grid.samples();

    let mut l = DMatrix::zeros(n, n);
    let mut unit = DensityField::zeros(mesh);
    for col in 0..n {
        unit.values_mut()[col] = 1.0;
        let mut g = grad_minus(&unit);
        for (c, m) in samples.iter().enumerate() {
            let f = m.g_inv.scale(m.sqrt_det).apply([g.u[c], g.v[c]]);
            g.u[c] = f[0];
            g.v[c] = f[1];
        }
        l.set_column(col, &DVector::from_column_slice(div_plus(&g).values()));
        unit.values_mut()[col] = 0.0;
    }

    let mut k = DMatrix::zeros(n, 2 * n);
    for col in 0..2 * n {
        let (cell, component) = (col % n, col / n);
        let m = &samples[cell];
        let e = if component == 0 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let f = m.g_inv_sqrt.scale(m.sqrt_det.sqrt()).apply(e);
        let mut vf = CellVectorField::zeros(mesh);
        vf.u[cell] = f[0];
        vf.v[cell] = f[1];
        k.set_column(col, &DVector::from_column_slice(div_plus(&vf).values()));
    }

    let j_diag = DVector::from_iterator(n, samples.iter().map(|m| m.sqrt_det));
    Ok(AssembledOperators { l, k, j_diag })
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

impl AssembledOperators {
    /// `max |L - L^T|`.
    pub fn symmetry_residual(&self) -> f64 {
        max_abs(&(&self.l - self.l.transpose()))
    }

    /// `max |L + K K^T|`.
    pub fn factorization_residual(&self) -> f64 {
        max_abs(&(&self.l + &self.k * self.k.transpose()))
    }

    /// `J^-1 L`, the generator of the linearized dynamics.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut a = self.l.clone();
        for (r, j) in self.j_diag.iter().enumerate() {
            a.row_mut(r).scale_mut(1.0 / j);
        }
        a
    }

    /// Residual of the stationary Lyapunov equation for `C = c J^-1`,
    /// `c = rho_bar / (N dx dy)`:
    /// `max |J^-1 L C + C L^T J^-1 + 2c J^-1 K K^T J^-1|`.
    pub fn lyapunov_residual(&self, c: f64) -> f64 {
        let inv_j = DMatrix::from_diagonal(&self.j_diag.map(|j| 1.0 / j));
        let cov = &inv_j * c;
        let lhs = &inv_j * &self.l * &cov + &cov * self.l.transpose() * &inv_j;
        let rhs = &inv_j * &self.k * self.k.transpose() * &inv_j * (2.0 * c);
        max_abs(&(lhs + rhs))
    }

    /// Apply `J^-1 L` to a field.
    pub fn apply_generator(&self, z: &[f64]) -> Vec<f64> {
        let v = &self.l * DVector::from_column_slice(z);
        v.iter()
            .zip(self.j_diag.iter())
            .map(|(x, j)| x / j)
            .collect()
    }
}
