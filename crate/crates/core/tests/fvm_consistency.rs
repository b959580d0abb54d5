use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use surfdk::fvm::{
    assemble_operators, deterministic_rhs, em_step, interaction_field, interaction_potential,
    linearized_ou_step, spectral_radius, DensityField, FvmStepper, NoiseDraw, NoiseMode,
    MAX_ASSEMBLY_CELLS,
};
use surfdk::geometry::{precompute_grid, HeightSurface, MetricGrid};
use surfdk::noise::StreamKey;
use surfdk::potential::{ExternalPotential, GaussianKernel, PairKernel, PotentialSpec};

fn bumpy_density(grid: &MetricGrid) -> DensityField {
    let values: Vec<f64> = grid
        .cell_centers()
        .iter()
        .map(|c| 1.0 + 0.5 * (c[0]).sin() * (2.0 * c[1]).cos() + 0.1 * c[0])
        .collect();
    let mut rho = DensityField::new(*grid.mesh(), values);
    let m = rho.mass(grid);
    rho.values_mut().iter_mut().for_each(|r| *r /= m);
    rho
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn fused_stepper_matches_matrix_free_step() {
    let key = StreamKey::derive(3, "fvm-noise");
    for surface in [
        HeightSurface::sinusoidal(3.0),
        HeightSurface::four_peak(4.0),
    ] {
        let grid = precompute_grid(&surface, 12, 10).unwrap();
        let potentials = PotentialSpec::external(ExternalPotential::SinSquared { v0: 5.0 });
        let mut fused = bumpy_density(&grid);
        let mut reference = fused.clone();
        let mut stepper = FvmStepper::new(
            &grid,
            &potentials,
            1000,
            2e-4,
            NoiseMode::Multiplicative { key },
        )
        .unwrap();
        for step in 0..20 {
            stepper.step(&mut fused).unwrap();
            let draw = NoiseDraw::for_step(&key, step, grid.mesh());
            reference = em_step(&reference, &grid, &potentials, 1000, 2e-4, Some(&draw)).unwrap();
        }
        assert!(max_diff(fused.values(), reference.values()) < 1e-13);
    }
}

#[test]
fn fused_stepper_with_pair_kernel_matches() {
    let grid = precompute_grid(&HeightSurface::sinusoidal(1.0), 8, 8).unwrap();
    let kernel: Arc<dyn PairKernel> =
        Arc::new(GaussianKernel::new(2.0, 0.7, grid.surface().lengths()));
    let potentials =
        PotentialSpec::external(ExternalPotential::SinSquared { v0: 1.0 }).with_pair(kernel);
    let mut fused = bumpy_density(&grid);
    let mut reference = fused.clone();
    let mut stepper = FvmStepper::new(&grid, &potentials, 100, 1e-3, NoiseMode::Off).unwrap();
    for _ in 0..10 {
        stepper.step(&mut fused).unwrap();
        reference = em_step(&reference, &grid, &potentials, 100, 1e-3, None).unwrap();
    }
    assert!(max_diff(fused.values(), reference.values()) < 1e-13);
}

#[test]
fn interaction_potential_and_field_agree() {
    // The field is G^-1 times the centred difference of the potential, up to quadrature.
    let grid = precompute_grid(&HeightSurface::flat(), 64, 64).unwrap();
    let kernel = GaussianKernel::new(1.0, 0.8, grid.surface().lengths());
    let rho = bumpy_density(&grid);
    let phi = interaction_potential(&rho, &grid, &kernel);
    let field = interaction_field(&rho, &grid, &kernel);
    let m = grid.mesh();
    let (i, j) = (20, 33);
    let dphi = (phi.get(i + 1, j) - phi.get(i - 1, j)) / (2.0 * m.dx);
    let k = m.idx(i, j);
    assert!(
        (field.u[k] - dphi).abs() < 1e-3 * (1.0 + dphi.abs()),
        "{} {dphi}",
        field.u[k]
    );
}

#[test]
fn linearized_stepper_matches_matrix_free_step() {
    let grid = precompute_grid(&HeightSurface::four_peak(4.0), 10, 10).unwrap();
    let key = StreamKey::derive(9, "fvm-noise");
    let rho_bar = 1.0 / grid.surface_area();
    let mut stepper = FvmStepper::new(
        &grid,
        &PotentialSpec::none(),
        2560,
        1e-4,
        NoiseMode::Linearized { key, rho_bar },
    )
    .unwrap();
    let mut fused = DensityField::zeros(*grid.mesh());
    let mut reference = fused.clone();
    for step in 0..30 {
        stepper.step(&mut fused).unwrap();
        let draw = NoiseDraw::for_step(&key, step, grid.mesh());
        reference =
            linearized_ou_step(&reference, &grid, 2560, rho_bar, 1e-4, Some(&draw)).unwrap();
    }
    let scale = reference
        .values()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(max_diff(fused.values(), reference.values()) < 1e-12 * scale);
}

#[test]
fn assembled_generator_matches_matrix_free_rhs() {
    let grid = precompute_grid(&HeightSurface::sinusoidal(3.0), 9, 7).unwrap();
    let ops = assemble_operators(&grid).unwrap();
    let rho = bumpy_density(&grid);
    let rhs = deterministic_rhs(&rho, &grid, &PotentialSpec::none());
    let assembled = ops.apply_generator(rho.values());
    assert!(max_diff(rhs.values(), &assembled) < 1e-12);
}

#[test]
fn assembled_noise_matches_matrix_free_increment() {
    let grid = precompute_grid(&HeightSurface::four_peak(2.0), 6, 6).unwrap();
    let ops = assemble_operators(&grid).unwrap();
    let key = StreamKey::derive(1, "fvm-noise");
    let draw = NoiseDraw::for_step(&key, 0, grid.mesh());
    let (n, dt, rho_bar) = (400, 1e-3, 1.0 / grid.surface_area());
    let z = linearized_ou_step(
        &DensityField::zeros(*grid.mesh()),
        &grid,
        n,
        rho_bar,
        dt,
        Some(&draw),
    )
    .unwrap();
    let xi = DVector::from_iterator(72, draw.zx.iter().chain(&draw.zy).copied());
    let scale = (2.0 * rho_bar / (n as f64 * grid.mesh().cell_area())).sqrt() * dt.sqrt();
    let kick = &ops.k * xi * scale;
    let expected: Vec<f64> = kick
        .iter()
        .zip(ops.j_diag.iter())
        .map(|(k, j)| k / j)
        .collect();
    assert!(max_diff(z.values(), &expected) < 1e-15);
}

#[test]
fn power_iteration_matches_dense_eigenvalues() {
    for surface in [
        HeightSurface::flat(),
        HeightSurface::sinusoidal(3.0),
        HeightSurface::four_peak(4.0),
    ] {
        let grid = precompute_grid(&surface, 8, 8).unwrap();
        let ops = assemble_operators(&grid).unwrap();
        let inv_sqrt = DMatrix::from_diagonal(&ops.j_diag.map(|j| 1.0 / j.sqrt()));
        let s = &inv_sqrt * (-&ops.l) * &inv_sqrt;
        let eig = SymmetricEigen::new(s);
        let dense = eig.eigenvalues.max();
        assert!(eig.eigenvalues.min() > -1e-10);
        let est = spectral_radius(&grid).unwrap();
        assert!(
            (est.lambda_max / dense - 1.0).abs() < 1e-4,
            "{:?}: {} vs {dense}",
            surface.kind(),
            est.lambda_max
        );
    }
}

#[test]
fn assembly_refuses_large_grids() {
    let grid = precompute_grid(&HeightSurface::flat(), 65, 64).unwrap();
    assert!(grid.mesh().len() > MAX_ASSEMBLY_CELLS);
    assert!(assemble_operators(&grid).is_err());
}

#[test]
fn flat_uniform_density_is_stationary_without_noise() {
    let grid = precompute_grid(&HeightSurface::sinusoidal(3.0), 16, 16).unwrap();
    let mut rho = DensityField::uniform(&grid);
    let start = rho.clone();
    let mut stepper =
        FvmStepper::new(&grid, &PotentialSpec::none(), 2560, 1e-3, NoiseMode::Off).unwrap();
    for _ in 0..100 {
        stepper.step(&mut rho).unwrap();
    }
    assert_eq!(rho, start);
}

#[test]
fn gibbs_state_is_stationary_in_the_limit() {
    // rho ~ exp(-V) balances diffusion against drift up to the stencil's truncation error
    let err = |n: usize| {
        let grid = precompute_grid(&HeightSurface::sinusoidal(1.0), n, n).unwrap();
        let v = ExternalPotential::SinSquared { v0: 1.0 };
        let values = grid
            .cell_centers()
            .iter()
            .map(|&c| (-v.value(c)).exp())
            .collect();
        let rho = DensityField::new(*grid.mesh(), values);
        let rhs = deterministic_rhs(&rho, &grid, &PotentialSpec::external(v));
        rhs.values().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(fine < coarse / 1.8, "{coarse} {fine}");
}
