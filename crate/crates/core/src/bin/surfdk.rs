use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfdk::config::{Experiment, ExperimentConfig};
use surfdk::harness::{self, Summary};

#[derive(Parser)]
#[command(
    name = "surfdk",
    version,
    about = "Dean-Kawasaki experiments on periodic Monge surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium statistics of the grid chain (and optionally particles).
    Equilibrium(RunArgs),
    /// Relaxation of a disk initial condition.
    Transient(RunArgs),
    /// Relaxation under the external potential v0 sin^2 x sin^2 y.
    Potential(RunArgs),
    /// Discrete fluctuation-dissipation checks.
    FdrCheck(RunArgs),
    /// Pure particle equilibrium run.
    Particles(RunArgs),
    /// Stability bound of the explicit scheme.
    EstimateDt(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set grid.nx=16`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Shorthand for `--set seed=...`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for `--set output.dir=...`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, surfdk::Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(Some(experiment), path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    for s in &args.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| surfdk::error::ConfigError::Syntax {
                line: 0,
                text: s.clone(),
            })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Summary, surfdk::Error> {
    Ok(match experiment {
        Experiment::Equilibrium => harness::run_equilibrium(cfg)?.summary(),
        Experiment::Transient => harness::run_transient(cfg)?.summary("transient"),
        Experiment::Potential => harness::run_potential(cfg)?.summary("potential"),
        Experiment::FdrCheck => harness::run_fdr_check(cfg)?.summary(),
        Experiment::Particles => harness::run_particles(cfg)?.summary(),
        Experiment::EstimateDt => harness::estimate_dt(cfg)?.summary(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Equilibrium(a) => (Experiment::Equilibrium, a),
        Command::Transient(a) => (Experiment::Transient, a),
        Command::Potential(a) => (Experiment::Potential, a),
        Command::FdrCheck(a) => (Experiment::FdrCheck, a),
        Command::Particles(a) => (Experiment::Particles, a),
        Command::EstimateDt(a) => (Experiment::EstimateDt, a),
    };
    let outcome = resolve(experiment, args).and_then(|cfg| {
        if args.print_config {
            print!("{}", cfg.to_manifest());
            return Ok(None);
        }
        run(experiment, &cfg).map(Some)
    });
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(summary)) => {
            println!("{summary}");
            if summary.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
