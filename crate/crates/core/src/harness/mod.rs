//! Configured experiments and their run directories.
//!
//! Every runner takes an [`ExperimentConfig`](crate::config::ExperimentConfig),
//! derives its random streams from the config seed (`fvm-noise`,
//! `particle-noise`, `init`) and, when `output.dir` is set, writes a
//! `manifest.txt`, per-cell CSV files and a `summary.txt`.

mod initial;
mod output;
mod runs;

pub use initial::{disk_value, initial_density};
pub use output::{read_density_csv, write_cell_csv, write_snapshot_csv, RunDirectory};
pub use runs::*;
