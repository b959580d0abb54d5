use super::{CellVectorField, DensityField};

/// Backward differences `((r[i,j] - r[i-1,j]) / dx, (r[i,j] - r[i,j-1]) / dy)`, periodic.
pub fn grad_minus(field: &DensityField) -> CellVectorField {
    let m = *field.mesh();
    let r = field.values();
    let mut u = vec![0.0; m.len()];
    let mut v = vec![0.0; m.len()];
    for j in 0..m.ny {
        let jm = if j == 0 { m.ny - 1 } else { j - 1 };
        for i in 0..m.nx {
            let im = if i == 0 { m.nx - 1 } else { i - 1 };
            let k = m.idx(i, j);
            u[k] = (r[k] - r[m.idx(im, j)]) / m.dx;
            v[k] = (r[k] - r[m.idx(i, jm)]) / m.dy;
        }
    }
    CellVectorField::new(m, u, v)
}

/// Forward-difference divergence `(u[i+1,j] - u[i,j]) / dx + (v[i,j+1] - v[i,j]) / dy`, periodic.
pub fn div_plus(vf: &CellVectorField) -> DensityField {
    let m = *vf.mesh();
    let mut out = vec![0.0; m.len()];
    for j in 0..m.ny {
        let jp = if j + 1 == m.ny { 0 } else { j + 1 };
        for i in 0..m.nx {
            let ip = if i + 1 == m.nx { 0 } else { i + 1 };
            let k = m.idx(i, j);
            out[k] = (vf.u[m.idx(ip, j)] - vf.u[k]) / m.dx + (vf.v[m.idx(i, jp)] - vf.v[k]) / m.dy;
        }
    }
    DensityField::new(m, out)
}
