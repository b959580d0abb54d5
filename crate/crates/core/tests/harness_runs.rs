use std::fs;
use std::path::Path;

use surfdk::config::{
    Experiment, ExperimentConfig, InitialSpec, Normalization, SurfaceShape, SurfaceSpec, TimeStep,
};
use surfdk::geometry::precompute_grid;
use surfdk::harness::{
    estimate_dt, initial_density, run_equilibrium, run_fdr_check, run_particle_chain,
    run_potential, run_transient, snapshot_steps,
};

fn small_transient(experiment: Experiment, dir: Option<&Path>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(experiment);
    cfg.nx = 16;
    cfg.ny = 16;
    cfg.particles = 5000;
    cfg.time_step = TimeStep::Absolute(1e-3);
    cfg.steps = 120;
    cfg.snapshot_times = vec![0.05, 0.1];
    cfg.initial = InitialSpec::Disk {
        center: [3.0, 3.0],
        radius: 1.2,
        normalization: Normalization::Surface,
    };
    cfg.output_dir = dir.map(Path::to_path_buf);
    cfg
}

fn snapshot_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("snapshot_")
        })
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn transient_run_directory_is_complete_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_transient(Experiment::Transient, Some(tmp.path()));
    let report = run_transient(&cfg).unwrap();
    assert_eq!(
        report.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(),
        vec![50, 100]
    );

    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# seed = 1"));
    assert_eq!(ExperimentConfig::parse(&manifest).unwrap(), cfg);

    let snaps = snapshot_bytes(tmp.path());
    assert_eq!(snaps.len(), 2);
    assert!(String::from_utf8_lossy(&snaps[0].1).starts_with("i,j,x,y,rho,count\n"));
    assert!(tmp.path().join("peaks.csv").exists());
    assert!(fs::read_to_string(tmp.path().join("summary.txt"))
        .unwrap()
        .contains("PASS mass"));

    // replay from the manifest alone
    let replay_dir = tempfile::tempdir().unwrap();
    let mut replay = ExperimentConfig::parse(&manifest).unwrap();
    replay.output_dir = Some(replay_dir.path().to_path_buf());
    run_transient(&replay).unwrap();
    assert_eq!(snapshot_bytes(replay_dir.path()), snaps);
}

#[test]
fn different_seeds_give_different_noise() {
    let a = run_transient(&small_transient(Experiment::Transient, None)).unwrap();
    let mut cfg = small_transient(Experiment::Transient, None);
    cfg.seed = 2;
    let b = run_transient(&cfg).unwrap();
    assert_ne!(a.snapshots[0].rho, b.snapshots[0].rho);
}

#[test]
fn zero_potential_is_bitwise_the_transient_run() {
    let t = tempfile::tempdir().unwrap();
    let p = tempfile::tempdir().unwrap();
    run_transient(&small_transient(Experiment::Transient, Some(t.path()))).unwrap();
    let mut cfg = small_transient(Experiment::Potential, Some(p.path()));
    cfg.v0 = 0.0;
    run_potential(&cfg).unwrap();
    assert_eq!(snapshot_bytes(t.path()), snapshot_bytes(p.path()));
}

#[test]
fn noise_free_transient_peak_decreases() {
    let mut cfg = small_transient(Experiment::Transient, None);
    cfg.noise = false;
    let report = run_transient(&cfg).unwrap();
    assert!(report.summary("transient").pass());
    let peaks = report.peak_rho();
    assert!(report.initial_max_rho > peaks[0] && peaks[0] > peaks[1]);
}

#[test]
fn snapshot_beyond_run_length_is_rejected() {
    let mut cfg = small_transient(Experiment::Transient, None);
    cfg.snapshot_times = vec![1.0];
    assert!(run_transient(&cfg)
        .unwrap_err()
        .to_string()
        .contains("output.snapshot_times"));
}

#[test]
fn snapshot_steps_round_to_the_published_times() {
    assert_eq!(
        snapshot_steps(&[1.88, 0.47, 0.94, 1.41], 1.506e-4),
        vec![3121, 6242, 9363, 12483]
    );
}

#[test]
fn noise_free_equilibrium_keeps_the_initial_state() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Equilibrium);
    cfg.nx = 8;
    cfg.ny = 8;
    cfg.noise = false;
    cfg.equilibration_steps = 10;
    cfg.sampling_steps = 100;
    let report = run_equilibrium(&cfg).unwrap();
    let grid = precompute_grid(&cfg.surface.build(), 8, 8).unwrap();
    let rho0 = initial_density(&InitialSpec::Uniform, &grid).unwrap();
    assert_eq!(report.moments.rho.mean(), rho0.values());
    assert!(report
        .moments
        .rho
        .variance()
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn particle_chain_is_independent_of_thread_count() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Particles);
    cfg.nx = 4;
    cfg.ny = 4;
    cfg.per_cell = 50;
    cfg.particles = 800;
    cfg.time_step = TimeStep::Absolute(1e-3);
    cfg.equilibration_steps = 20;
    cfg.sampling_steps = 40;
    let grid = precompute_grid(&cfg.surface.build(), 4, 4).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_particle_chain(&cfg, &grid, 1e-3).unwrap())
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.moments, three.moments);
}

#[test]
fn particle_count_must_match_the_initial_layout() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Particles);
    cfg.nx = 4;
    cfg.ny = 4;
    cfg.particles = 17;
    let grid = precompute_grid(&cfg.surface.build(), 4, 4).unwrap();
    assert!(run_particle_chain(&cfg, &grid, 1e-3)
        .unwrap_err()
        .to_string()
        .contains("particles.n"));
}

#[test]
fn dt_estimate_reports_fraction_and_implied_fraction() {
    let mut cfg = ExperimentConfig::defaults(Experiment::EstimateDt);
    cfg.surface = SurfaceSpec {
        shape: SurfaceShape::Flat,
        amplitude: 0.0,
    };
    cfg.time_step = TimeStep::Fraction(0.5);
    let r = estimate_dt(&cfg).unwrap();
    let h = 2.0 * std::f64::consts::PI / 32.0;
    assert!((r.dt_max / (h * h / 4.0) - 1.0).abs() < 1e-5);
    assert!((r.dt - 0.5 * r.dt_max).abs() < 1e-15);
    cfg.time_step = TimeStep::Absolute(r.dt_max / 4.0);
    assert!((estimate_dt(&cfg).unwrap().fraction - 0.25).abs() < 1e-12);
}

#[test]
fn fdr_check_algebra_passes_on_small_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::defaults(Experiment::FdrCheck);
    cfg.nx = 6;
    cfg.ny = 6;
    cfg.equilibration_steps = 100;
    cfg.sampling_steps = 2000;
    cfg.output_dir = Some(tmp.path().to_path_buf());
    let report = run_fdr_check(&cfg).unwrap();
    assert_eq!(report.algebraic.len(), 4);
    assert!(
        report.algebraic.iter().all(|a| a.pass()),
        "{:?}",
        report.algebraic
    );
    assert_eq!(report.statistical.covariance.len(), 4);
    assert!(tmp.path().join("ou_variance.csv").exists());
}

#[test]
fn config_file_round_trip_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.conf");
    fs::write(&path, "# desk scale\nexperiment = equilibrium\ngrid.nx = 16\ngrid.ny = 16\nrun.dt_fraction = 1.5625e-2\n")
        .unwrap();
    let cfg = ExperimentConfig::load(None, &path).unwrap();
    assert_eq!((cfg.nx, cfg.time_step), (16, TimeStep::Fraction(1.5625e-2)));
    assert!(ExperimentConfig::load(Some(Experiment::Transient), &path).is_err());
    assert!(ExperimentConfig::load(None, &tmp.path().join("missing.conf")).is_err());
}
