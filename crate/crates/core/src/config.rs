//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # lines starting with '#' are comments
//! experiment = transient
//! surface.kind = four_peak
//! surface.amplitude = 4
//! grid.nx = 64
//! grid.ny = 64
//! run.dt = 1.506e-4
//! output.snapshot_times = 0.47, 0.94, 1.41, 1.88
//! ```
//!
//! Parsing starts from the defaults of the chosen experiment, so a file only
//! needs the keys it changes. [`ExperimentConfig::to_manifest`] writes every
//! key back out and re-parses to an equal config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::ConfigError;
use crate::geometry::HeightSurface;
use crate::potential::ExternalPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Equilibrium,
    Transient,
    Potential,
    FdrCheck,
    Particles,
    EstimateDt,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Equilibrium,
        Experiment::Transient,
        Experiment::Potential,
        Experiment::FdrCheck,
        Experiment::Particles,
        Experiment::EstimateDt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Equilibrium => "equilibrium",
            Experiment::Transient => "transient",
            Experiment::Potential => "potential",
            Experiment::FdrCheck => "fdr-check",
            Experiment::Particles => "particles",
            Experiment::EstimateDt => "estimate-dt",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ConfigError::invalid("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceShape {
    Flat,
    Sinusoidal,
    FourPeak,
}

impl SurfaceShape {
    fn name(self) -> &'static str {
        match self {
            SurfaceShape::Flat => "flat",
            SurfaceShape::Sinusoidal => "sinusoidal",
            SurfaceShape::FourPeak => "four_peak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSpec {
    pub shape: SurfaceShape,
    pub amplitude: f64,
}

impl SurfaceSpec {
    pub fn build(&self) -> HeightSurface {
        match self.shape {
            SurfaceShape::Flat => HeightSurface::flat(),
            SurfaceShape::Sinusoidal => HeightSurface::sinusoidal(self.amplitude),
            SurfaceShape::FourPeak => HeightSurface::four_peak(self.amplitude),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Absolute(f64),
    /// Fraction of the estimated maximum stable step.
    Fraction(f64),
}

/// Measure under which a disk initial condition integrates to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `sum rho sqrt|G| dx dy = 1`.
    Surface,
    /// `sum rho dx dy = 1`.
    Lebesgue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// `rho = 1 / A_S`.
    Uniform,
    Disk {
        center: [f64; 2],
        radius: f64,
        normalization: Normalization,
    },
    /// CSV with columns `i,j,rho` (extra columns ignored).
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub surface: SurfaceSpec,
    pub nx: usize,
    pub ny: usize,
    pub particles: usize,
    pub time_step: TimeStep,
    /// Total steps of a transient run.
    pub steps: u64,
    pub equilibration_steps: u64,
    pub sampling_steps: u64,
    pub sample_every: u64,
    /// Batches for batch-means standard errors.
    pub batches: u64,
    pub v0: f64,
    pub noise: bool,
    /// Run the particle chain alongside the grid chain.
    pub with_particles: bool,
    /// Particles per cell for the particle chain's initial state.
    pub per_cell: usize,
    pub initial: InitialSpec,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "experiment",
    "surface.kind",
    "surface.amplitude",
    "grid.nx",
    "grid.ny",
    "particles.n",
    "particles.enabled",
    "particles.per_cell",
    "run.dt",
    "run.dt_fraction",
    "run.steps",
    "run.equilibration_steps",
    "run.sampling_steps",
    "run.sample_every",
    "run.batches",
    "potential.v0",
    "noise.enabled",
    "init.kind",
    "init.center",
    "init.radius",
    "init.normalization",
    "init.file",
    "output.snapshot_times",
    "output.dir",
    "seed",
];

impl ExperimentConfig {
    /// Published setup of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let pi = std::f64::consts::PI;
        let base = ExperimentConfig {
            experiment,
            surface: SurfaceSpec {
                shape: SurfaceShape::Sinusoidal,
                amplitude: 3.0,
            },
            nx: 32,
            ny: 32,
            particles: 10240,
            time_step: TimeStep::Absolute(1.506e-4),
            steps: 50_000,
            equilibration_steps: 100_000,
            sampling_steps: 1_000_000,
            sample_every: 10,
            batches: 20,
            v0: 0.0,
            noise: true,
            with_particles: false,
            per_cell: 10,
            initial: InitialSpec::Uniform,
            snapshot_times: Vec::new(),
            seed: 1,
            output_dir: None,
        };
        match experiment {
            Experiment::Equilibrium | Experiment::EstimateDt => base,
            Experiment::Particles => ExperimentConfig {
                with_particles: true,
                ..base
            },
            Experiment::Transient | Experiment::Potential => ExperimentConfig {
                surface: SurfaceSpec {
                    shape: SurfaceShape::FourPeak,
                    amplitude: 4.0,
                },
                nx: 64,
                ny: 64,
                particles: 100_000,
                v0: if experiment == Experiment::Potential {
                    5.0
                } else {
                    0.0
                },
                initial: InitialSpec::Disk {
                    center: [pi, pi],
                    radius: 0.2 * pi,
                    normalization: Normalization::Surface,
                },
                snapshot_times: vec![0.47, 0.94, 1.41, 1.88],
                ..base
            },
            Experiment::FdrCheck => ExperimentConfig {
                surface: SurfaceSpec {
                    shape: SurfaceShape::Flat,
                    amplitude: 0.0,
                },
                nx: 16,
                ny: 16,
                particles: 2560,
                time_step: TimeStep::Fraction(1.5625e-2),
                equilibration_steps: 10_000,
                sampling_steps: 2_000_000,
                ..base
            },
        }
    }

    /// Parse a config file; the `experiment` key is required.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = split_lines(text)?;
        let experiment = pairs
            .iter()
            .find(|(k, _, _)| k == "experiment")
            .map(|(_, v, _)| v.parse::<Experiment>())
            .transpose()?
            .ok_or_else(|| ConfigError::MissingKey("experiment".into()))?;
        Self::defaults(experiment).with_pairs(&pairs)
    }

    /// Parse with the experiment fixed by the caller; an `experiment` key in
    /// the text must agree.
    pub fn parse_for(experiment: Experiment, text: &str) -> Result<Self, ConfigError> {
        let pairs = split_lines(text)?;
        let cfg = Self::defaults(experiment).with_pairs(&pairs)?;
        if cfg.experiment != experiment {
            return Err(ConfigError::invalid(
                "experiment",
                format!("file is for `{}`, requested `{experiment}`", cfg.experiment),
            ));
        }
        Ok(cfg)
    }

    pub fn load(experiment: Option<Experiment>, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        match experiment {
            Some(e) => Self::parse_for(e, &text),
            None => Self::parse(&text),
        }
    }

    /// Apply one `key = value` override and re-validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut next = self.clone();
        next.apply(key, value, &mut Seen::default())?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn with_pairs(mut self, pairs: &[(String, String, usize)]) -> Result<Self, ConfigError> {
        let mut seen = Seen::default();
        for (k, v, _) in pairs {
            self.apply(k, v, &mut seen)?;
        }
        self.validate()?;
        Ok(self)
    }

    fn apply(&mut self, key: &str, value: &str, seen: &mut Seen) -> Result<(), ConfigError> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "surface.kind" => {
                self.surface.shape = match value {
                    "flat" => SurfaceShape::Flat,
                    "sinusoidal" => SurfaceShape::Sinusoidal,
                    "four_peak" => SurfaceShape::FourPeak,
                    _ => {
                        return Err(ConfigError::invalid(
                            key,
                            "expected flat, sinusoidal or four_peak",
                        ))
                    }
                }
            }
            "surface.amplitude" => self.surface.amplitude = number(key, value)?,
            "grid.nx" => self.nx = number(key, value)?,
            "grid.ny" => self.ny = number(key, value)?,
            "particles.n" => self.particles = number(key, value)?,
            "particles.enabled" => self.with_particles = number(key, value)?,
            "particles.per_cell" => self.per_cell = number(key, value)?,
            "run.dt" => {
                if seen.fraction {
                    return Err(ConfigError::invalid(
                        key,
                        "run.dt and run.dt_fraction are mutually exclusive",
                    ));
                }
                seen.dt = true;
                self.time_step = TimeStep::Absolute(number(key, value)?);
            }
            "run.dt_fraction" => {
                if seen.dt {
                    return Err(ConfigError::invalid(
                        key,
                        "run.dt and run.dt_fraction are mutually exclusive",
                    ));
                }
                seen.fraction = true;
                self.time_step = TimeStep::Fraction(number(key, value)?);
            }
            "run.steps" => self.steps = number(key, value)?,
            "run.equilibration_steps" => self.equilibration_steps = number(key, value)?,
            "run.sampling_steps" => self.sampling_steps = number(key, value)?,
            "run.sample_every" => self.sample_every = number(key, value)?,
            "run.batches" => self.batches = number(key, value)?,
            "potential.v0" => self.v0 = number(key, value)?,
            "noise.enabled" => self.noise = number(key, value)?,
            "init.kind" => {
                self.initial = match value {
                    "uniform" => InitialSpec::Uniform,
                    "disk" => match &self.initial {
                        d @ InitialSpec::Disk { .. } => d.clone(),
                        _ => {
                            let pi = std::f64::consts::PI;
                            InitialSpec::Disk {
                                center: [pi, pi],
                                radius: 0.2 * pi,
                                normalization: Normalization::Surface,
                            }
                        }
                    },
                    "file" => InitialSpec::File(PathBuf::new()),
                    _ => return Err(ConfigError::invalid(key, "expected uniform, disk or file")),
                }
            }
            "init.center" | "init.radius" | "init.normalization" => {
                let InitialSpec::Disk {
                    center,
                    radius,
                    normalization,
                } = &mut self.initial
                else {
                    return Err(ConfigError::invalid(
                        key,
                        "only valid with init.kind = disk",
                    ));
                };
                match key {
                    "init.center" => {
                        let v = list(key, value)?;
                        if v.len() != 2 {
                            return Err(ConfigError::invalid(key, "expected `x, y`"));
                        }
                        *center = [v[0], v[1]];
                    }
                    "init.radius" => *radius = number(key, value)?,
                    _ => {
                        *normalization = match value {
                            "surface" => Normalization::Surface,
                            "lebesgue" => Normalization::Lebesgue,
                            _ => {
                                return Err(ConfigError::invalid(
                                    key,
                                    "expected surface or lebesgue",
                                ))
                            }
                        }
                    }
                }
            }
            "init.file" => {
                let InitialSpec::File(path) = &mut self.initial else {
                    return Err(ConfigError::invalid(
                        key,
                        "only valid with init.kind = file",
                    ));
                };
                *path = PathBuf::from(value);
            }
            "output.snapshot_times" => {
                self.snapshot_times = if value.is_empty() {
                    Vec::new()
                } else {
                    list(key, value)?
                }
            }
            "output.dir" => self.output_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "seed" => self.seed = number(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err(ConfigError::invalid(key, "must be positive"))
            } else {
                Ok(())
            }
        };
        if self.nx < 2 || self.ny < 2 {
            return Err(ConfigError::invalid(
                "grid.nx",
                "grid needs at least 2 cells per axis",
            ));
        }
        positive("particles.n", self.particles as u64)?;
        positive("particles.per_cell", self.per_cell as u64)?;
        positive("run.steps", self.steps)?;
        positive("run.sampling_steps", self.sampling_steps)?;
        positive("run.sample_every", self.sample_every)?;
        if self.batches < 2 {
            return Err(ConfigError::invalid(
                "run.batches",
                "need at least 2 batches",
            ));
        }
        match self.time_step {
            TimeStep::Absolute(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return Err(ConfigError::invalid(
                    "run.dt",
                    "must be positive and finite",
                ));
            }
            TimeStep::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(ConfigError::invalid(
                    "run.dt_fraction",
                    "must lie in (0, 1]",
                ));
            }
            _ => {}
        }
        if !self.surface.amplitude.is_finite() {
            return Err(ConfigError::invalid("surface.amplitude", "must be finite"));
        }
        if !self.v0.is_finite() {
            return Err(ConfigError::invalid("potential.v0", "must be finite"));
        }
        if let InitialSpec::Disk { radius, .. } = self.initial {
            if !(radius > 0.0) {
                return Err(ConfigError::invalid("init.radius", "must be positive"));
            }
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(ConfigError::invalid(
                "output.snapshot_times",
                "times must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn potential(&self) -> ExternalPotential {
        if self.v0 == 0.0 {
            ExternalPotential::None
        } else {
            ExternalPotential::SinSquared { v0: self.v0 }
        }
    }

    /// Every key with its resolved value, in a form `parse` accepts.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("experiment", self.experiment.to_string());
        put("surface.kind", self.surface.shape.name().into());
        put("surface.amplitude", self.surface.amplitude.to_string());
        put("grid.nx", self.nx.to_string());
        put("grid.ny", self.ny.to_string());
        put("particles.n", self.particles.to_string());
        put("particles.enabled", self.with_particles.to_string());
        put("particles.per_cell", self.per_cell.to_string());
        match self.time_step {
            TimeStep::Absolute(dt) => put("run.dt", dt.to_string()),
            TimeStep::Fraction(f) => put("run.dt_fraction", f.to_string()),
        }
        put("run.steps", self.steps.to_string());
        put(
            "run.equilibration_steps",
            self.equilibration_steps.to_string(),
        );
        put("run.sampling_steps", self.sampling_steps.to_string());
        put("run.sample_every", self.sample_every.to_string());
        put("run.batches", self.batches.to_string());
        put("potential.v0", self.v0.to_string());
        put("noise.enabled", self.noise.to_string());
        match &self.initial {
            InitialSpec::Uniform => put("init.kind", "uniform".into()),
            InitialSpec::Disk {
                center,
                radius,
                normalization,
            } => {
                put("init.kind", "disk".into());
                put("init.center", format!("{}, {}", center[0], center[1]));
                put("init.radius", radius.to_string());
                let n = match normalization {
                    Normalization::Surface => "surface",
                    Normalization::Lebesgue => "lebesgue",
                };
                put("init.normalization", n.into());
            }
            InitialSpec::File(path) => {
                put("init.kind", "file".into());
                put("init.file", path.display().to_string());
            }
        }
        let times: Vec<String> = self.snapshot_times.iter().map(f64::to_string).collect();
        put("output.snapshot_times", times.join(", "));
        put(
            "output.dir",
            self.output_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        put("seed", self.seed.to_string());
        out
    }

    pub fn keys() -> &'static [&'static str] {
        KEYS
    }
}

#[derive(Default)]
struct Seen {
    dt: bool,
    fraction: bool,
}

fn split_lines(text: &str) -> Result<Vec<(String, String, usize)>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: n + 1,
            text: raw.to_string(),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                text: raw.to_string(),
            });
        }
        out.push((k.to_string(), v.trim().to_string(), n + 1));
    }
    Ok(out)
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    // Accept `1e5` style integers.
    if let Ok(v) = value.parse::<T>() {
        return Ok(v);
    }
    if let Ok(f) = value.parse::<f64>() {
        if f.fract() == 0.0 && f >= 0.0 {
            if let Ok(v) = format!("{f:.0}").parse::<T>() {
                return Ok(v);
            }
        }
    }
    value
        .parse::<T>()
        .map_err(|e| ConfigError::invalid(key, format!("`{value}`: {e}")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|s| number::<f64>(key, s.trim()))
        .collect()
}
