use std::f64::consts::PI;

use surfdk::config::{Experiment, ExperimentConfig, SurfaceShape, SurfaceSpec, TimeStep};
use surfdk::geometry::{HeightSurface, Point};
use surfdk::harness::run_particles;
use surfdk::noise::StreamKey;
use surfdk::particles::{em_step, ParticleEnsemble, ParticleNoise};
use surfdk::potential::{ExternalPotential, PotentialSpec};

fn moments(points: &[Point], origin: Point) -> ([f64; 2], [f64; 3]) {
    let m = points.len() as f64;
    let d: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p[0] - origin[0], p[1] - origin[1]])
        .collect();
    let mean = [
        d.iter().map(|v| v[0]).sum::<f64>() / m,
        d.iter().map(|v| v[1]).sum::<f64>() / m,
    ];
    let c = |a: usize, b: usize| {
        d.iter()
            .map(|v| (v[a] - mean[a]) * (v[b] - mean[b]))
            .sum::<f64>()
            / (m - 1.0)
    };
    (mean, [c(0, 0), c(0, 1), c(1, 1)])
}

#[test]
fn flat_brownian_motion_has_diffusive_moments() {
    let surface = HeightSurface::flat();
    let m = 20_000;
    let origin = [PI, PI];
    let mut ensemble = ParticleEnsemble::new(&surface, vec![origin; m]);
    let mut noise = ParticleNoise::streams(&StreamKey::derive(4, "particle-noise"), m);
    let (dt, steps) = (1e-3, 100);
    for _ in 0..steps {
        em_step(
            &mut ensemble,
            &surface,
            &PotentialSpec::none(),
            dt,
            &mut noise,
        )
        .unwrap();
    }
    let t = dt * steps as f64;
    let (mean, cov) = moments(ensemble.positions(), origin);
    let se_mean = (2.0 * t / m as f64).sqrt();
    let se_var = 2.0 * t * (2.0 / m as f64).sqrt();
    assert!(
        mean[0].abs() < 4.0 * se_mean && mean[1].abs() < 4.0 * se_mean,
        "{mean:?}"
    );
    assert!(
        (cov[0] - 2.0 * t).abs() < 4.0 * se_var && (cov[2] - 2.0 * t).abs() < 4.0 * se_var,
        "{cov:?}"
    );
    assert!(cov[1].abs() < 4.0 * 2.0 * t / (m as f64).sqrt(), "{cov:?}");
    assert!((ensemble.time() - t).abs() < 1e-12);
}

#[test]
fn one_step_increment_has_the_metric_covariance() {
    let surface = HeightSurface::sinusoidal(3.0);
    let x0 = [0.4, 2.1];
    let m = 40_000;
    let mut ensemble = ParticleEnsemble::new(&surface, vec![x0; m]);
    let mut noise = ParticleNoise::streams(&StreamKey::derive(5, "particle-noise"), m);
    let dt = 1e-4;
    em_step(
        &mut ensemble,
        &surface,
        &PotentialSpec::none(),
        dt,
        &mut noise,
    )
    .unwrap();
    let metric = surface.metric_at(x0).unwrap();
    let (mean, cov) = moments(ensemble.positions(), x0);
    let want = [
        2.0 * dt * metric.g_inv.xx,
        2.0 * dt * metric.g_inv.xy,
        2.0 * dt * metric.g_inv.yy,
    ];
    for k in 0..3 {
        assert!(
            (cov[k] - want[k]).abs() < 0.05 * 2.0 * dt,
            "{cov:?} vs {want:?}"
        );
    }
    for d in 0..2 {
        let se = (2.0 * dt / m as f64).sqrt();
        assert!(
            (mean[d] - metric.drift[d] * dt).abs() < 4.0 * se,
            "{mean:?}"
        );
    }
}

/// `int_cell sqrt|G| exp(-V)` by an `s x s` midpoint rule inside each cell.
fn fine_cell_weights(
    surface: &HeightSurface,
    v: &ExternalPotential,
    n: usize,
    s: usize,
) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            for b in 0..s {
                for a in 0..s {
                    let p = [
                        (i as f64 + (a as f64 + 0.5) / s as f64) * h,
                        (j as f64 + (b as f64 + 0.5) / s as f64) * h,
                    ];
                    w[j * n + i] += surface.metric_at(p).unwrap().sqrt_det * (-v.value(p)).exp();
                }
            }
        }
    }
    w
}

#[test]
fn particle_histogram_follows_the_gibbs_measure() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Particles);
    cfg.surface = SurfaceSpec {
        shape: SurfaceShape::Sinusoidal,
        amplitude: 1.0,
    };
    cfg.nx = 8;
    cfg.ny = 8;
    cfg.per_cell = 20;
    cfg.particles = 20 * 64;
    cfg.v0 = 1.0;
    cfg.time_step = TimeStep::Absolute(2e-3);
    cfg.equilibration_steps = 5_000;
    cfg.sampling_steps = 50_000;
    cfg.sample_every = 5;
    cfg.batches = 20;
    let report = run_particles(&cfg).unwrap();

    let weights = fine_cell_weights(&cfg.surface.build(), &cfg.potential(), 8, 16);
    let z: f64 = weights.iter().sum();
    let se = report.chain.batches.standard_error().unwrap();
    let worst = report
        .chain
        .batches
        .mean()
        .iter()
        .zip(&weights)
        .zip(&se)
        .map(|((m, w), s)| ((m - cfg.particles as f64 * w / z) / s).abs())
        .fold(0.0, f64::max);
    assert!(worst < 4.0, "worst |z| = {worst}");
    let total: f64 = report.chain.moments.mean().iter().sum();
    assert!((total - cfg.particles as f64).abs() < 1e-6);
}
