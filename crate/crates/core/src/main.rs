use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tiled_sds::cli::{run, Experiment, ExperimentConfig};
use tiled_sds::Error;

/// Run one of the tiled score-distillation experiments.
#[derive(Debug, Parser)]
#[command(name = "tiled-sds", version)]
struct Args {
    /// equivalence | stride_ablation | sds_convergence | shading_demo
    experiment: String,
    /// Flat `key = value` config file, applied over the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` or `--key=value` overrides, applied last.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!("outputs in {}", config.output_dir.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(args: &Args) -> Result<ExperimentConfig, Error> {
    let experiment: Experiment = args.experiment.parse().map_err(|m: String| Error::Config {
        key: "experiment".into(),
        message: m,
    })?;
    // `--config` may also land among the trailing overrides.
    let mut file = args.config.clone();
    let mut rest = Vec::with_capacity(args.overrides.len());
    let mut it = args.overrides.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = it.next().ok_or_else(|| Error::Config {
                key: "config".into(),
                message: "missing value".into(),
            })?;
            file = Some(PathBuf::from(path));
        } else if let Some(path) = a.strip_prefix("--config=") {
            file = Some(PathBuf::from(path));
        } else {
            rest.push(a.clone());
        }
    }
    ExperimentConfig::load(experiment, file.as_deref(), &rest)
}
