//! Noisy relaxation of a disk of density on the four-peak surface.

use surfdk::config::{Experiment, ExperimentConfig, TimeStep};
use surfdk::harness::run_transient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::defaults(Experiment::Transient);
    cfg.nx = 32;
    cfg.ny = 32;
    cfg.time_step = TimeStep::Fraction(0.25);
    cfg.steps = 4000;
    cfg.snapshot_times = vec![0.1, 0.2, 0.4];
    let report = run_transient(&cfg)?;
    println!("{}", report.summary("disk relaxation"));
    Ok(())
}
