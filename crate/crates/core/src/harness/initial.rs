use std::path::Path;

use crate::config::{InitialSpec, Normalization};
use crate::error::{ConfigError, Error};
use crate::fvm::DensityField;
use crate::geometry::MetricGrid;

const MASS_TOLERANCE: f64 = 1e-8;

/// Initial density on the grid, normalized as declared.
pub fn initial_density(spec: &InitialSpec, grid: &MetricGrid) -> Result<DensityField, Error> {
    match spec {
        InitialSpec::Uniform => Ok(DensityField::uniform(grid)),
        InitialSpec::Disk {
            center,
            radius,
            normalization,
        } => disk(grid, *center, *radius, *normalization),
        InitialSpec::File(path) => {
            let values = super::output::read_density_csv(path, grid.mesh())?;
            let rho = DensityField::new(*grid.mesh(), values);
            check_mass(&rho, grid, path)?;
            Ok(rho)
        }
    }
}

/// Value inside the disk so the declared measure of the disk is one.
pub fn disk_value(
    grid: &MetricGrid,
    center: [f64; 2],
    radius: f64,
    normalization: Normalization,
) -> Result<f64, Error> {
    let area = grid.mesh().cell_area();
    let measure: f64 = inside(grid, center, radius)
        .map(|k| match normalization {
            Normalization::Surface => grid.samples()[k].sqrt_det * area,
            Normalization::Lebesgue => area,
        })
        .sum();
    if measure == 0.0 {
        return Err(ConfigError::invalid("init.radius", "disk contains no cell centres").into());
    }
    Ok(1.0 / measure)
}

fn inside(grid: &MetricGrid, center: [f64; 2], radius: f64) -> impl Iterator<Item = usize> + '_ {
    grid.cell_centers()
        .into_iter()
        .enumerate()
        .filter(move |(_, c)| (c[0] - center[0]).hypot(c[1] - center[1]) < radius)
        .map(|(k, _)| k)
}

fn disk(
    grid: &MetricGrid,
    center: [f64; 2],
    radius: f64,
    normalization: Normalization,
) -> Result<DensityField, Error> {
    let value = disk_value(grid, center, radius, normalization)?;
    let mut rho = DensityField::zeros(*grid.mesh());
    for k in inside(grid, center, radius).collect::<Vec<_>>() {
        rho.values_mut()[k] = value;
    }
    Ok(rho)
}

fn check_mass(rho: &DensityField, grid: &MetricGrid, path: &Path) -> Result<(), Error> {
    let mass = rho.mass(grid);
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(ConfigError::invalid(
            "init.file",
            format!(
                "{}: density integrates to {mass} under the surface measure",
                path.display()
            ),
        )
        .into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{precompute_grid, HeightSurface};
    use std::f64::consts::PI;

    #[test]
    fn uniform_has_unit_mass() {
        let grid = precompute_grid(&HeightSurface::sinusoidal(3.0), 16, 16).unwrap();
        let rho = initial_density(&InitialSpec::Uniform, &grid).unwrap();
        assert!((rho.mass(&grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disk_normalizations() {
        let grid = precompute_grid(&HeightSurface::four_peak(4.0), 64, 64).unwrap();
        let surface = disk_value(&grid, [PI, PI], 0.2 * PI, Normalization::Surface).unwrap();
        assert!((surface - 0.801421).abs() < 5e-7, "{surface}");
        let lebesgue = disk_value(&grid, [PI, PI], 0.2 * PI, Normalization::Lebesgue).unwrap();
        let cells = 1.0 / (lebesgue * grid.mesh().cell_area());
        assert!((cells - 124.0).abs() < 1e-9);
        let spec = InitialSpec::Disk {
            center: [PI, PI],
            radius: 0.2 * PI,
            normalization: Normalization::Surface,
        };
        let rho = initial_density(&spec, &grid).unwrap();
        assert!((rho.mass(&grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_disk_is_rejected() {
        let grid = precompute_grid(&HeightSurface::flat(), 4, 4).unwrap();
        assert!(disk_value(&grid, [0.0, 0.0], 0.1, Normalization::Surface).is_err());
    }
}
