use std::fmt;

use crate::config::{ExperimentConfig, TimeStep};
use crate::error::{ConfigError, Error, FvmError};
use crate::fvm::{
    assemble_operators, spectral_radius, DensityField, FvmStepper, NoiseMode, MAX_ASSEMBLY_CELLS,
};
use crate::geometry::{precompute_grid, HeightSurface, MetricGrid};
use crate::noise::StreamKey;
use crate::particles::{bin_to_grid, em_step, sample_initial, ParticleNoise};
use crate::potential::PotentialSpec;
use crate::stats::{
    cell_integrated_counts, compare, cross_validate, gibbs_mean_counts, rho_to_counts,
    theory_reference, BatchMeans, CellMoments, ComparisonReport, CrossValidation, RunningMoments,
    TheoryReference, Tolerances, ZComparison,
};

use super::initial::initial_density;
use super::output::{write_cell_csv, write_snapshot_csv, RunDirectory};

/// Standard errors allowed between Monte-Carlo estimates.
pub const Z_THRESHOLD: f64 = 3.0;

/// Sub-cell resolution of the cell-integrated occupancy.
pub const CELL_SUBDIVISIONS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Human-readable summary block with the run's named checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub title: String,
    pub values: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Summary {
    fn new(title: &str) -> Self {
        Summary {
            title: title.to_string(),
            ..Default::default()
        }
    }

    fn value(&mut self, key: &str, value: impl fmt::Display) {
        self.values.push((key.to_string(), value.to_string()));
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.title)?;
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        write!(f, "overall = {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

fn grid_for(cfg: &ExperimentConfig) -> Result<MetricGrid, Error> {
    Ok(precompute_grid(&cfg.surface.build(), cfg.nx, cfg.ny)?)
}

/// Absolute step, or the configured fraction of the estimated stability bound.
pub fn resolve_dt(cfg: &ExperimentConfig, grid: &MetricGrid) -> Result<f64, Error> {
    match cfg.time_step {
        TimeStep::Absolute(dt) => Ok(dt),
        TimeStep::Fraction(f) => Ok(f * 2.0 / spectral_radius(grid)?.lambda_max),
    }
}

fn open_dir(cfg: &ExperimentConfig) -> Result<Option<RunDirectory>, Error> {
    cfg.output_dir
        .as_deref()
        .map(|p| RunDirectory::create(p, cfg))
        .transpose()
}

fn finish(dir: &Option<RunDirectory>, summary: &Summary) -> Result<(), Error> {
    if let Some(d) = dir {
        d.write_text("summary.txt", &format!("{summary}\n"))?;
    }
    Ok(())
}

fn fvm_noise(cfg: &ExperimentConfig) -> NoiseMode {
    if cfg.noise {
        NoiseMode::Multiplicative {
            key: StreamKey::derive(cfg.seed, "fvm-noise"),
        }
    } else {
        NoiseMode::Off
    }
}

fn samples_per_batch(cfg: &ExperimentConfig) -> u64 {
    (cfg.sampling_steps / cfg.sample_every / cfg.batches).max(1)
}

/// Per-cell particle counts sampled from an equilibrium particle chain.
#[derive(Debug, Clone)]
pub struct ParticleChain {
    pub moments: CellMoments,
    pub batches: BatchMeans,
}

/// Equilibrate then sample a particle chain with the config's protocol.
pub fn run_particle_chain(
    cfg: &ExperimentConfig,
    grid: &MetricGrid,
    dt: f64,
) -> Result<ParticleChain, Error> {
    let cells = grid.mesh().len();
    if cfg.per_cell * cells != cfg.particles {
        return Err(ConfigError::invalid(
            "particles.n",
            format!(
                "must equal particles.per_cell x cells = {}",
                cfg.per_cell * cells
            ),
        )
        .into());
    }
    let mut rng = StreamKey::derive(cfg.seed, "init").rng(0);
    let mut ensemble = sample_initial(grid, cfg.per_cell, &mut rng);
    let mut noise = if cfg.noise {
        ParticleNoise::streams(
            &StreamKey::derive(cfg.seed, "particle-noise"),
            ensemble.len(),
        )
    } else {
        ParticleNoise::Zero
    };
    let potentials = PotentialSpec::external(cfg.potential());
    let surface = grid.surface();
    for _ in 0..cfg.equilibration_steps {
        em_step(&mut ensemble, surface, &potentials, dt, &mut noise)?;
    }
    let mut moments = CellMoments::new(cells);
    let mut batches = BatchMeans::new(cells, samples_per_batch(cfg));
    for step in 1..=cfg.sampling_steps {
        em_step(&mut ensemble, surface, &potentials, dt, &mut noise)?;
        if step % cfg.sample_every == 0 {
            let counts: Vec<f64> = bin_to_grid(&ensemble, grid.mesh())
                .into_iter()
                .map(f64::from)
                .collect();
            moments.push(&counts)?;
            batches.push(&counts)?;
        }
    }
    Ok(ParticleChain { moments, batches })
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub dt: f64,
    pub theory: TheoryReference,
    pub moments: RunningMoments,
    pub count_batches: BatchMeans,
    pub comparison: ComparisonReport,
    pub particle: Option<ParticleChain>,
    pub cross: Option<CrossValidation>,
    /// Particle counts against the cell-integrated occupancy; diagnostic only.
    pub particle_vs_cell_integral: Option<ZComparison>,
    /// Cells whose density went negative inside the noise amplitude.
    pub negative_cells: u64,
}

impl EquilibriumReport {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::new("equilibrium");
        s.value("dt", self.dt);
        s.value("samples", self.moments.samples());
        s.value("negative_cells", self.negative_cells);
        for f in &self.comparison.fields {
            s.checks.push(Check::new(
                f.name,
                f.pass,
                format!(
                    "max |rel err| {:.4} median {:.4} tolerance {}",
                    f.max_abs, f.median_abs, f.tolerance
                ),
            ));
        }
        if let Some(c) = &self.particle_vs_cell_integral {
            s.value(
                "particle_vs_cell_integral",
                format!(
                    "max |z| {:.3}, {} cells beyond {} SE (diagnostic)",
                    c.max_abs_z, c.exceedances, c.threshold
                ),
            );
        }
        if let Some(cross) = &self.cross {
            for c in cross.comparisons() {
                s.checks.push(z_check(c));
            }
        }
        s
    }
}

fn z_check(c: &ZComparison) -> Check {
    Check::new(
        c.name,
        c.pass(),
        format!(
            "max |z| {:.3}, {} of {} cells beyond {} SE (expected by chance {:.2})",
            c.max_abs_z,
            c.exceedances,
            c.z.len(),
            c.threshold,
            c.expected_exceedances()
        ),
    )
}

/// Equilibrium statistics of the grid chain, and optionally of a particle chain.
pub fn run_equilibrium(cfg: &ExperimentConfig) -> Result<EquilibriumReport, Error> {
    let dir = open_dir(cfg)?;
    let grid = grid_for(cfg)?;
    let dt = resolve_dt(cfg, &grid)?;
    let cells = grid.mesh().len();
    let theory = theory_reference(&grid, cfg.particles);
    let potentials = PotentialSpec::external(cfg.potential());

    let mut rho = initial_density(&cfg.initial, &grid)?;
    let mut stepper = FvmStepper::new(&grid, &potentials, cfg.particles, dt, fvm_noise(cfg))?;
    for _ in 0..cfg.equilibration_steps {
        stepper
            .step(&mut rho)
            .map_err(|e| Error::from(e).context("equilibration"))?;
    }
    let mut moments = RunningMoments::new(cells);
    let mut count_batches = BatchMeans::new(cells, samples_per_batch(cfg));
    for step in 1..=cfg.sampling_steps {
        stepper
            .step(&mut rho)
            .map_err(|e| Error::from(e).context("sampling"))?;
        if step % cfg.sample_every == 0 {
            let counts = rho_to_counts(rho.values(), &grid, cfg.particles);
            moments.update(rho.values(), &counts)?;
            count_batches.push(&counts)?;
        }
    }
    let comparison = compare(&moments, &theory, &Tolerances::default())?;

    let particle = if cfg.with_particles {
        Some(run_particle_chain(cfg, &grid, dt)?)
    } else {
        None
    };
    let cross = match &particle {
        Some(p) => {
            let reference = gibbs_mean_counts(&grid, &cfg.potential(), cfg.particles);
            Some(cross_validate(
                &p.batches,
                &count_batches,
                &reference,
                Z_THRESHOLD,
            )?)
        }
        None => None,
    };
    let particle_vs_cell_integral = match &particle {
        Some(p) => {
            let integrated =
                cell_integrated_counts(&grid, &cfg.potential(), cfg.particles, CELL_SUBDIVISIONS);
            let se = p.batches.standard_error()?;
            Some(ZComparison::new(
                "particle_vs_cell_integral",
                p.batches.mean(),
                &integrated,
                &se,
                Z_THRESHOLD,
            ))
        }
        None => None,
    };

    let report = EquilibriumReport {
        particle_vs_cell_integral,
        dt,
        theory,
        negative_cells: stepper.negative_cells(),
        moments,
        count_batches,
        comparison,
        particle,
        cross,
    };
    if let Some(d) = &dir {
        let var_rho = report.moments.rho.variance().unwrap_or_default();
        let var_counts = report.moments.counts.variance().unwrap_or_default();
        let sqrt_det = grid.sqrt_det();
        let mut columns: Vec<(&str, &[f64])> = vec![
            ("sqrt_det", &sqrt_det),
            ("mean_rho", report.moments.rho.mean()),
            ("var_rho", &var_rho),
            ("mean_count", report.moments.counts.mean()),
            ("var_count", &var_counts),
            ("theory_var_rho", &report.theory.var_rho),
            ("theory_count", &report.theory.mean_counts),
        ];
        let particle_var = report.particle.as_ref().and_then(|p| p.moments.variance());
        if let (Some(p), Some(v)) = (&report.particle, &particle_var) {
            columns.push(("particle_mean_count", p.moments.mean()));
            columns.push(("particle_var_count", v));
        }
        write_cell_csv(&d.file("equilibrium.csv"), &grid, &columns)?;
    }
    finish(&dir, &report.summary())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub time: f64,
    pub max_rho: f64,
    pub max_count: f64,
    pub mass: f64,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientReport {
    pub dt: f64,
    pub initial_max_rho: f64,
    pub initial_mass: f64,
    pub snapshots: Vec<Snapshot>,
    pub final_mass: f64,
    pub negative_cells: u64,
    pub noise: bool,
}

impl TransientReport {
    pub fn peak_rho(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.max_rho).collect()
    }

    pub fn peak_counts(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.max_count).collect()
    }

    pub fn summary(&self, title: &str) -> Summary {
        let mut s = Summary::new(title);
        s.value("dt", self.dt);
        s.value("initial_max_rho", self.initial_max_rho);
        for snap in &self.snapshots {
            s.value(
                &format!("t={:.4}", snap.time),
                format!(
                    "step {} max_rho {:.6} max_count {:.2}",
                    snap.step, snap.max_rho, snap.max_count
                ),
            );
        }
        s.value("negative_cells", self.negative_cells);
        let drift = ((self.final_mass - self.initial_mass) / self.initial_mass).abs();
        s.checks.push(Check::new(
            "mass",
            drift <= 1e-10,
            format!("relative drift {drift:.3e}"),
        ));
        if !self.noise {
            let mut peaks = vec![self.initial_max_rho];
            peaks.extend(self.peak_rho());
            let decreasing = peaks.windows(2).all(|w| w[1] < w[0]);
            s.checks.push(Check::new(
                "monotone_peak",
                decreasing,
                format!("{peaks:?}"),
            ));
        }
        s
    }
}

/// Step indices `round(t / dt)` of the snapshot times, sorted.
pub fn snapshot_steps(times: &[f64], dt: f64) -> Vec<u64> {
    let mut steps: Vec<u64> = times.iter().map(|t| (t / dt).round() as u64).collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Evolve an initial density and record snapshots at the configured times.
pub fn run_transient(cfg: &ExperimentConfig) -> Result<TransientReport, Error> {
    let dir = open_dir(cfg)?;
    let grid = grid_for(cfg)?;
    let dt = resolve_dt(cfg, &grid)?;
    let steps = snapshot_steps(&cfg.snapshot_times, dt);
    if let Some(&last) = steps.last() {
        if last > cfg.steps {
            return Err(ConfigError::invalid(
                "output.snapshot_times",
                format!(
                    "snapshot at step {last} lies beyond run.steps = {}",
                    cfg.steps
                ),
            )
            .into());
        }
    }
    let mut rho = initial_density(&cfg.initial, &grid)?;
    let initial_mass = rho.mass(&grid);
    let initial_max_rho = rho.max();
    let potentials = PotentialSpec::external(cfg.potential());
    let mut stepper = FvmStepper::new(&grid, &potentials, cfg.particles, dt, fvm_noise(cfg))?;

    let mut snapshots = Vec::with_capacity(steps.len());
    let mut pending = steps.iter().peekable();
    let mut record = |rho: &DensityField, step: u64| -> Result<(), Error> {
        let counts = rho_to_counts(rho.values(), &grid, cfg.particles);
        snapshots.push(Snapshot {
            step,
            time: step as f64 * dt,
            max_rho: rho.max(),
            max_count: counts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mass: rho.mass(&grid),
            rho: rho.values().to_vec(),
        });
        if let Some(d) = &dir {
            write_snapshot_csv(
                &d.file(&format!("snapshot_{step:06}.csv")),
                &grid,
                rho.values(),
                cfg.particles,
            )?;
        }
        Ok(())
    };
    while pending.next_if_eq(&&0).is_some() {
        record(&rho, 0)?;
    }
    for step in 1..=cfg.steps {
        stepper
            .step(&mut rho)
            .map_err(|e| Error::from(e).context(format!("{} run", cfg.experiment)))?;
        while pending.next_if_eq(&&step).is_some() {
            record(&rho, step)?;
        }
    }
    let report = TransientReport {
        dt,
        initial_max_rho,
        initial_mass,
        final_mass: rho.mass(&grid),
        negative_cells: stepper.negative_cells(),
        noise: cfg.noise,
        snapshots,
    };
    if let Some(d) = &dir {
        let mut w = csv::Writer::from_path(d.file("peaks.csv"))?;
        w.write_record(["step", "time", "max_rho", "max_count", "mass"])?;
        for s in &report.snapshots {
            w.write_record([
                s.step.to_string(),
                s.time.to_string(),
                s.max_rho.to_string(),
                s.max_count.to_string(),
                s.mass.to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: d.file("peaks.csv"),
            source,
        })?;
    }
    finish(&dir, &report.summary(cfg.experiment.name()))?;
    Ok(report)
}

/// Transient run under the external potential `v0 sin^2 x sin^2 y`.
pub fn run_potential(cfg: &ExperimentConfig) -> Result<TransientReport, Error> {
    run_transient(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicCheck {
    pub surface: String,
    pub nx: usize,
    pub ny: usize,
    pub symmetry: f64,
    pub factorization: f64,
    pub lyapunov: f64,
}

impl AlgebraicCheck {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn pass(&self) -> bool {
        self.symmetry <= Self::TOLERANCE
            && self.factorization <= Self::TOLERANCE
            && self.lyapunov <= Self::TOLERANCE
    }
}

/// Assembled-operator identities on one grid, with `N` particles.
pub fn algebraic_check(
    surface: &HeightSurface,
    nx: usize,
    ny: usize,
    n: usize,
) -> Result<AlgebraicCheck, Error> {
    let grid = precompute_grid(surface, nx, ny)?;
    let ops = assemble_operators(&grid)?;
    let c = 1.0 / (grid.surface_area() * n as f64 * grid.mesh().cell_area());
    Ok(AlgebraicCheck {
        surface: format!("{:?}", surface.kind()),
        nx,
        ny,
        symmetry: ops.symmetry_residual(),
        factorization: ops.factorization_residual(),
        lyapunov: ops.lyapunov_residual(c),
    })
}

/// Stationary statistics of the linearized chain.
#[derive(Debug, Clone, PartialEq)]
pub struct OuStatistics {
    pub dt: f64,
    pub samples: u64,
    /// `rho_bar / (N dx dy J)` per cell.
    pub reference_variance: Vec<f64>,
    pub variance: Vec<f64>,
    pub max_variance_error: f64,
    pub covariance: Vec<PairCovariance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCovariance {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub covariance: f64,
    pub standard_error: f64,
}

impl PairCovariance {
    pub fn z(&self) -> f64 {
        self.covariance / self.standard_error
    }
}

impl OuStatistics {
    pub const VARIANCE_TOLERANCE: f64 = 0.05;

    pub fn variance_pass(&self) -> bool {
        self.max_variance_error <= Self::VARIANCE_TOLERANCE
    }

    pub fn covariance_pass(&self) -> bool {
        self.covariance.iter().all(|c| c.z().abs() <= Z_THRESHOLD)
    }
}

/// Cells paired with cell `(0, 0)` for the off-diagonal covariance test.
pub fn covariance_partners(nx: usize, ny: usize) -> Vec<(usize, usize)> {
    vec![(1, 0), (0, 1), (1, 1), (nx / 2, ny / 2)]
}

/// Run the linearized chain on the config's grid and measure its stationary covariance.
pub fn linearized_statistics(cfg: &ExperimentConfig) -> Result<OuStatistics, Error> {
    let grid = grid_for(cfg)?;
    let dt = resolve_dt(cfg, &grid)?;
    let mesh = *grid.mesh();
    let rho_bar = 1.0 / grid.surface_area();
    let key = StreamKey::derive(cfg.seed, "fvm-noise");
    let mut stepper = FvmStepper::new(
        &grid,
        &PotentialSpec::none(),
        cfg.particles,
        dt,
        NoiseMode::Linearized { key, rho_bar },
    )?;
    let mut z = DensityField::zeros(mesh);
    for _ in 0..cfg.equilibration_steps {
        stepper.step(&mut z)?;
    }
    let partners = covariance_partners(mesh.nx, mesh.ny);
    let mut moments = CellMoments::new(mesh.len());
    let mut products = BatchMeans::new(partners.len(), samples_per_batch(cfg));
    let mut buf = vec![0.0; partners.len()];
    for step in 1..=cfg.sampling_steps {
        stepper.step(&mut z)?;
        if step % cfg.sample_every == 0 {
            let v = z.values();
            moments.push(v)?;
            for (b, &(i, j)) in buf.iter_mut().zip(&partners) {
                *b = v[0] * v[mesh.idx(i, j)];
            }
            products.push(&buf)?;
        }
    }
    let c = rho_bar / (cfg.particles as f64 * mesh.cell_area());
    let reference_variance: Vec<f64> = grid.samples().iter().map(|m| c / m.sqrt_det).collect();
    let variance = moments
        .variance()
        .ok_or(crate::error::StatsError::TooFewSamples(moments.count()))?;
    let max_variance_error = variance
        .iter()
        .zip(&reference_variance)
        .map(|(v, r)| (v / r - 1.0).abs())
        .fold(0.0, f64::max);
    let se = products.standard_error()?;
    let covariance = partners
        .iter()
        .zip(products.mean().iter().zip(&se))
        .map(|(&b, (&covariance, &standard_error))| PairCovariance {
            a: (0, 0),
            b,
            covariance,
            standard_error,
        })
        .collect();
    Ok(OuStatistics {
        dt,
        samples: moments.count(),
        reference_variance,
        variance,
        max_variance_error,
        covariance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrReport {
    pub algebraic: Vec<AlgebraicCheck>,
    pub statistical: OuStatistics,
}

impl FdrReport {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::new("fdr-check");
        for a in &self.algebraic {
            s.checks.push(Check::new(
                format!("algebra {} {}x{}", a.surface, a.nx, a.ny),
                a.pass(),
                format!(
                    "|L-L^T| {:.2e} |L+KK^T| {:.2e} lyapunov {:.2e}",
                    a.symmetry, a.factorization, a.lyapunov
                ),
            ));
        }
        let st = &self.statistical;
        s.value("dt", st.dt);
        s.value("samples", st.samples);
        s.checks.push(Check::new(
            "ou_variance",
            st.variance_pass(),
            format!(
                "max |rel err| {:.4} tolerance {}",
                st.max_variance_error,
                OuStatistics::VARIANCE_TOLERANCE
            ),
        ));
        for c in &st.covariance {
            s.checks.push(Check::new(
                format!("ou_covariance {:?}-{:?}", c.a, c.b),
                c.z().abs() <= Z_THRESHOLD,
                format!(
                    "cov {:.3e} se {:.3e} z {:.2}",
                    c.covariance,
                    c.standard_error,
                    c.z()
                ),
            ));
        }
        s
    }
}

/// Algebraic identities on 8x8 grids of the built-in surfaces and the
/// configured surface, then the statistical check on the configured grid.
pub fn run_fdr_check(cfg: &ExperimentConfig) -> Result<FdrReport, Error> {
    let dir = open_dir(cfg)?;
    if cfg.nx * cfg.ny > MAX_ASSEMBLY_CELLS {
        return Err(FvmError::TooLargeForAssembly {
            nx: cfg.nx,
            ny: cfg.ny,
            limit: MAX_ASSEMBLY_CELLS,
        }
        .into());
    }
    let mut algebraic = Vec::new();
    for surface in [
        HeightSurface::flat(),
        HeightSurface::sinusoidal(3.0),
        HeightSurface::four_peak(4.0),
        cfg.surface.build(),
    ] {
        algebraic.push(algebraic_check(&surface, 8, 8, cfg.particles)?);
    }
    let statistical = linearized_statistics(cfg)?;
    if let Some(d) = &dir {
        let grid = grid_for(cfg)?;
        write_cell_csv(
            &d.file("ou_variance.csv"),
            &grid,
            &[
                ("variance", &statistical.variance),
                ("reference", &statistical.reference_variance),
            ],
        )?;
    }
    let report = FdrReport {
        algebraic,
        statistical,
    };
    finish(&dir, &report.summary())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ParticleReport {
    pub dt: f64,
    pub chain: ParticleChain,
    /// Gibbs mean counts `N J e^-V dx dy / Z`.
    pub reference: Vec<f64>,
    pub mean_vs_reference: ZComparison,
    /// Against the occupancy integrated over each cell; diagnostic only.
    pub mean_vs_cell_integral: ZComparison,
}

impl ParticleReport {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::new("particles");
        s.value("dt", self.dt);
        s.value("samples", self.chain.moments.count());
        let c = &self.mean_vs_cell_integral;
        s.value(
            "vs_cell_integral",
            format!(
                "max |z| {:.3}, {} cells beyond {} SE (diagnostic)",
                c.max_abs_z, c.exceedances, c.threshold
            ),
        );
        s.checks.push(z_check(&self.mean_vs_reference));
        s
    }
}

/// Pure particle run: equilibrium counts against the Gibbs reference.
pub fn run_particles(cfg: &ExperimentConfig) -> Result<ParticleReport, Error> {
    let dir = open_dir(cfg)?;
    let grid = grid_for(cfg)?;
    let dt = resolve_dt(cfg, &grid)?;
    let chain = run_particle_chain(cfg, &grid, dt)?;
    let reference = gibbs_mean_counts(&grid, &cfg.potential(), cfg.particles);
    let se = chain.batches.standard_error()?;
    let mean_vs_reference = ZComparison::new(
        "particle_vs_theory",
        chain.batches.mean(),
        &reference,
        &se,
        Z_THRESHOLD,
    );
    let integrated =
        cell_integrated_counts(&grid, &cfg.potential(), cfg.particles, CELL_SUBDIVISIONS);
    let mean_vs_cell_integral = ZComparison::new(
        "particle_vs_cell_integral",
        chain.batches.mean(),
        &integrated,
        &se,
        Z_THRESHOLD,
    );
    if let Some(d) = &dir {
        let var = chain.moments.variance().unwrap_or_default();
        write_cell_csv(
            &d.file("particles.csv"),
            &grid,
            &[
                ("mean_count", chain.moments.mean()),
                ("var_count", &var),
                ("standard_error", &se),
                ("reference", &reference),
                ("cell_integral", &integrated),
            ],
        )?;
    }
    let report = ParticleReport {
        dt,
        chain,
        reference,
        mean_vs_reference,
        mean_vs_cell_integral,
    };
    finish(&dir, &report.summary())?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtReport {
    pub lambda_max: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub dt_max: f64,
    pub fraction: f64,
    pub dt: f64,
}

impl DtReport {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::new("estimate-dt");
        s.value("lambda_max", self.lambda_max);
        s.value("iterations", self.iterations);
        s.value(
            "relative_residual",
            format!("{:.3e}", self.relative_residual),
        );
        s.value("dt_max", self.dt_max);
        s.value("fraction", self.fraction);
        s.value("dt", self.dt);
        s
    }
}

/// Power-iteration stability bound; `dt` is the configured fraction of it,
/// or the configured absolute step with its implied fraction.
pub fn estimate_dt(cfg: &ExperimentConfig) -> Result<DtReport, Error> {
    let dir = open_dir(cfg)?;
    let grid = grid_for(cfg)?;
    let est = spectral_radius(&grid)?;
    let dt_max = 2.0 / est.lambda_max;
    let (fraction, dt) = match cfg.time_step {
        TimeStep::Fraction(f) => (f, f * dt_max),
        TimeStep::Absolute(dt) => (dt / dt_max, dt),
    };
    let report = DtReport {
        lambda_max: est.lambda_max,
        iterations: est.iterations,
        relative_residual: est.relative_residual,
        dt_max,
        fraction,
        dt,
    };
    finish(&dir, &report.summary())?;
    Ok(report)
}
