use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qkernel::experiment::{run_and_write, ExperimentConfig, RunError, Task};

/// Quantum-kernel experiments on simulated star-topology spin registers.
#[derive(Parser, Debug)]
#[command(name = "qkernel", version)]
struct Cli {
    /// kernel-1d, kernel-2d, regress-sine, regress-poly7, classify-circles,
    /// classify-moons, entangle-classify or baseline
    task: String,
    /// JSON configuration; defaults are used for absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<String, RunError> {
    let task = Task::from_name(&cli.task).ok_or_else(|| {
        let names: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
        RunError::Config(format!("unknown task `{}`, expected one of {}", cli.task, names.join(", ")))
    })?;
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        cfg.out_dir = dir;
    }
    let out = run_and_write(task, &cfg)?;
    Ok(serde_json::to_string(&out.metrics).expect("metrics serialize"))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(metrics) => {
            println!("{metrics}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
