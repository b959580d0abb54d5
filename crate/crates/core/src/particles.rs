//! Euler-Maruyama Langevin particles on a Monge surface.
//!
//! Each particle follows
//!
//! ```text
//! dX = b(X) dt - G^-1 grad V(X) dt - (1/N) sum_j G^-1 grad_x U(X, X_j) dt + sqrt(2) G^-1/2(X) dB
//! ```
//!
//! in coordinates, wrapped back into the periodic rectangle after every step.
//! Particle `k` draws its Gaussian increments from ChaCha stream `k`, so runs
//! are reproducible for any thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::ParticleError;
use crate::geometry::{HeightSurface, Mesh, MetricGrid, Point};
use crate::noise::{GaussianStream, StreamKey};
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<Point>,
    time: f64,
}

impl ParticleEnsemble {
    /// Ensemble at `t = 0`; positions are wrapped into the surface domain.
    pub fn new(surface: &HeightSurface, positions: Vec<Point>) -> Self {
        let positions = positions.into_iter().map(|p| surface.wrap(p)).collect();
        ParticleEnsemble {
            positions,
            time: 0.0,
        }
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Source of the Gaussian increments.
#[derive(Debug, Clone)]
pub enum ParticleNoise {
    /// Deterministic drift-only dynamics.
    Zero,
    /// One stream per particle.
    Streams(Vec<GaussianStream>),
}

impl ParticleNoise {
    pub fn streams(key: &StreamKey, particles: usize) -> Self {
        ParticleNoise::Streams(
            (0..particles as u64)
                .map(|k| GaussianStream::new(key, k))
                .collect(),
        )
    }
}

/// `per_cell` particles in every cell, uniform within the cell.
pub fn sample_initial<R: Rng + ?Sized>(
    grid: &MetricGrid,
    per_cell: usize,
    rng: &mut R,
) -> ParticleEnsemble {
    let mesh = grid.mesh();
    let mut positions = Vec::with_capacity(per_cell * mesh.len());
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            for _ in 0..per_cell {
                let x = (i as f64 + rng.random::<f64>()) * mesh.dx;
                let y = (j as f64 + rng.random::<f64>()) * mesh.dy;
                positions.push([x, y]);
            }
        }
    }
    ParticleEnsemble::new(grid.surface(), positions)
}

/// Particle count per cell, indexed like the grid.
pub fn bin_to_grid(ensemble: &ParticleEnsemble, mesh: &Mesh) -> Vec<u32> {
    let mut counts = vec![0u32; mesh.len()];
    for &p in &ensemble.positions {
        let (i, j) = mesh.locate(p);
        counts[mesh.idx(i, j)] += 1;
    }
    counts
}

/// Advance every particle by one Euler-Maruyama step of length `dt`.
pub fn em_step(
    ensemble: &mut ParticleEnsemble,
    surface: &HeightSurface,
    potentials: &PotentialSpec,
    dt: f64,
    noise: &mut ParticleNoise,
) -> Result<(), ParticleError> {
    if !(dt > 0.0) {
        return Err(ParticleError::InvalidTimeStep(dt));
    }
    let n = ensemble.positions.len();
    let time = ensemble.time + dt;
    let amp = (2.0 * dt).sqrt();
    // Jacobi update: pair forces see the positions at the start of the step.
    let snapshot = potentials.pair.as_ref().map(|_| ensemble.positions.clone());

    let advance = |index: usize, x: &mut Point, xi: [f64; 2]| -> Result<(), ParticleError> {
        let m = surface.metric_at(*x)?;
        let mut force = [0.0; 2];
        if !potentials.external.is_zero() {
            let g = potentials.external.gradient(*x);
            force = [-g[0], -g[1]];
        }
        if let (Some(kernel), Some(others)) = (&potentials.pair, &snapshot) {
            let mut acc = [0.0; 2];
            for &y in others {
                let g = kernel.grad_x(*x, y);
                acc[0] += g[0];
                acc[1] += g[1];
            }
            force[0] -= acc[0] / n as f64;
            force[1] -= acc[1] / n as f64;
        }
        let f = m.g_inv.apply(force);
        let w = m.g_inv_sqrt.apply(xi);
        let next = [
            x[0] + (m.drift[0] + f[0]) * dt + amp * w[0],
            x[1] + (m.drift[1] + f[1]) * dt + amp * w[1],
        ];
        if !(next[0].is_finite() && next[1].is_finite()) {
            return Err(ParticleError::Blowup { index, time });
        }
        *x = surface.wrap(next);
        Ok(())
    };

    match noise {
        ParticleNoise::Zero => ensemble
            .positions
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(k, x)| advance(k, x, [0.0; 2]))?,
        ParticleNoise::Streams(streams) => {
            assert_eq!(streams.len(), n, "one noise stream per particle");
            ensemble
                .positions
                .par_iter_mut()
                .zip(streams.par_iter_mut())
                .enumerate()
                .try_for_each(|(k, (x, s))| advance(k, x, s.next_pair()))?
        }
    }
    ensemble.time = time;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::precompute_grid;
    use crate::potential::ExternalPotential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn single_particle_bins_to_origin_cell() {
        let grid = precompute_grid(&HeightSurface::flat(), 8, 8).unwrap();
        let m = grid.mesh();
        let e = ParticleEnsemble::new(grid.surface(), vec![[m.dx / 2.0, m.dy / 2.0]]);
        let counts = bin_to_grid(&e, m);
        assert_eq!(counts[0], 1);
        assert_eq!(counts.iter().sum::<u32>(), 1);
    }

    #[test]
    fn one_particle_per_centre() {
        let grid = precompute_grid(&HeightSurface::sinusoidal(3.0), 6, 5).unwrap();
        let e = ParticleEnsemble::new(grid.surface(), grid.cell_centers());
        assert!(bin_to_grid(&e, grid.mesh()).iter().all(|&c| c == 1));
    }

    #[test]
    fn initial_sampling_fills_cells() {
        let grid = precompute_grid(&HeightSurface::sinusoidal(3.0), 32, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = sample_initial(&grid, 10, &mut rng);
        assert_eq!(e.len(), 10240);
        assert!(bin_to_grid(&e, grid.mesh()).iter().all(|&c| c == 10));
        assert!(sample_initial(&grid, 0, &mut rng).is_empty());
    }

    #[test]
    fn no_motion_where_drift_vanishes() {
        let s = HeightSurface::sinusoidal(3.0);
        let mut e = ParticleEnsemble::new(&s, vec![[FRAC_PI_2, FRAC_PI_2]]);
        em_step(
            &mut e,
            &s,
            &PotentialSpec::none(),
            1e-3,
            &mut ParticleNoise::Zero,
        )
        .unwrap();
        let p = e.positions()[0];
        assert!((p[0] - FRAC_PI_2).abs() < 1e-15 && (p[1] - FRAC_PI_2).abs() < 1e-15);
        assert!((e.time() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn potential_pushes_downhill() {
        let s = HeightSurface::flat();
        let v = ExternalPotential::SinSquared { v0: 5.0 };
        let start = [FRAC_PI_2 + 0.1, FRAC_PI_2];
        // direct evaluation of -grad V dt
        let dt = 1e-3;
        let g = v.gradient(start);
        let expected = [start[0] - g[0] * dt, start[1] - g[1] * dt];
        let mut e = ParticleEnsemble::new(&s, vec![start]);
        em_step(
            &mut e,
            &s,
            &PotentialSpec::external(v),
            dt,
            &mut ParticleNoise::Zero,
        )
        .unwrap();
        let p = e.positions()[0];
        assert!((p[0] - expected[0]).abs() < 1e-15 && (p[1] - expected[1]).abs() < 1e-15);
        assert!(
            p[0] > start[0],
            "x = pi/2 is a maximum of sin^2 x, the particle moves away from it"
        );
    }

    #[test]
    fn rejects_bad_time_step() {
        let s = HeightSurface::flat();
        let mut e = ParticleEnsemble::new(&s, vec![[1.0, 1.0]]);
        assert!(matches!(
            em_step(
                &mut e,
                &s,
                &PotentialSpec::none(),
                0.0,
                &mut ParticleNoise::Zero
            ),
            Err(ParticleError::InvalidTimeStep(_))
        ));
    }

    #[test]
    fn blowup_is_reported() {
        let s = HeightSurface::flat();
        let v = ExternalPotential::Custom {
            value: std::sync::Arc::new(|_, _| 0.0),
            gradient: std::sync::Arc::new(|_, _| [f64::NAN, 0.0]),
        };
        let mut e = ParticleEnsemble::new(&s, vec![[1.0, 1.0], [2.0, 2.0]]);
        let err = em_step(
            &mut e,
            &s,
            &PotentialSpec::external(v),
            0.1,
            &mut ParticleNoise::Zero,
        );
        assert!(matches!(err, Err(ParticleError::Blowup { .. })));
    }
}
