//! The same relaxation with and without the external trap, noise off.

use surfdk::config::{Experiment, ExperimentConfig, TimeStep};
use surfdk::harness::run_potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for v0 in [0.0, 5.0] {
        let mut cfg = ExperimentConfig::defaults(Experiment::Potential);
        cfg.nx = 32;
        cfg.ny = 32;
        cfg.noise = false;
        cfg.v0 = v0;
        cfg.time_step = TimeStep::Fraction(0.25);
        cfg.steps = 8000;
        cfg.snapshot_times = vec![0.2, 0.4, 0.8];
        let report = run_potential(&cfg)?;
        let peaks: Vec<String> = report
            .peak_rho()
            .iter()
            .map(|p| format!("{p:.4}"))
            .collect();
        println!("v0 = {v0}: peak density {}", peaks.join(", "));
    }
    Ok(())
}
