//! Short equilibrium run of the grid chain against the Poisson reference.

use surfdk::config::{Experiment, ExperimentConfig, TimeStep};
use surfdk::harness::run_equilibrium;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::defaults(Experiment::Equilibrium);
    cfg.nx = 8;
    cfg.ny = 8;
    cfg.particles = 640;
    cfg.time_step = TimeStep::Fraction(0.05);
    cfg.equilibration_steps = 5_000;
    cfg.sampling_steps = 800_000;
    let report = run_equilibrium(&cfg)?;
    println!("{}", report.summary());
    Ok(())
}
