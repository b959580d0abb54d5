use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("custom surface has no gradient function")]
    MissingGradient,
    #[error("grid must have at least 2 cells per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },
    #[error("domain lengths must be positive and finite, got {lx} x {ly}")]
    InvalidDomain { lx: f64, ly: f64 },
}

#[derive(Debug, Error)]
pub enum ParticleError {
    #[error("particle {index} left the finite range at t = {time}")]
    Blowup { index: usize, time: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum FvmError {
    #[error("non-finite density at step {step}")]
    Blowup { step: u64 },
    #[error("field has {got} cells, grid has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("grid {nx}x{ny} exceeds the dense assembly limit of {limit} cells")]
    TooLargeForAssembly { nx: usize, ny: usize, limit: usize },
    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("snapshot has {got} cells, accumulator has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("need at least 2 samples, have {0}")]
    TooFewSamples(u64),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ConfigError {
    pub(crate) fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

/// Top-level error for experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error(transparent)]
    Fvm(#[from] FvmError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Run { context: String, source: Box<Error> },
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
