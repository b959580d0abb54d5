//! Config text in, replayable run directory out.

use surfdk::config::ExperimentConfig;
use surfdk::harness::run_transient;

const CONFIG: &str = "
experiment = transient
surface.kind = four_peak
surface.amplitude = 4
grid.nx = 24
grid.ny = 24
particles.n = 20000
run.dt_fraction = 0.25
run.steps = 600
init.kind = disk
init.center = 3.14159, 3.14159
init.radius = 0.8
output.snapshot_times = 0.02, 0.04
seed = 11
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("surfdk-run-directory-example");
    let mut cfg = ExperimentConfig::parse(CONFIG)?;
    cfg.output_dir = Some(dir.clone());
    cfg.validate()?;
    run_transient(&cfg)?;

    println!("wrote {}", dir.display());
    let mut names: Vec<_> = std::fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for name in names {
        println!("  {name}");
    }
    println!(
        "\nmanifest.txt:\n{}",
        std::fs::read_to_string(dir.join("manifest.txt"))?
    );
    Ok(())
}
