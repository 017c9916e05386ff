//! `advcal` — experiment front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime numeric failure.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{parse_config, parse_config_override, Experiment};

#[derive(Parser, Debug)]
#[command(
    name = "advcal",
    about = "Calibration checkers and simulated-data risk experiments for adversarial surrogate losses"
)]
struct Cli {
    /// Configuration document (flat key = value with `[experiment]` sections).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Experiment to run: unit_circle, segments, consistency_curve,
    /// calibration_report, or margin_oracle. Overrides the document.
    #[arg(long)]
    experiment: Option<String>,

    /// Override the document's seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the document's output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (0 keeps the rayon default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn real_main(cli: Cli) -> Result<(), runner::RunError> {
    let override_exp = match &cli.experiment {
        Some(name) => Some(Experiment::parse(name).ok_or_else(|| {
            runner::RunError::Config(config::ConfigError {
                line: 0,
                col: 0,
                message: format!("unknown experiment `{name}`"),
            })
        })?),
        None => None,
    };

    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            runner::RunError::Config(config::ConfigError {
                line: 0,
                col: 0,
                message: format!("cannot read {}: {e}", path.display()),
            })
        })?,
        None => String::new(),
    };
    if cli.config.is_none() && override_exp.is_none() {
        return Err(runner::RunError::Config(config::ConfigError {
            line: 0,
            col: 0,
            message: "pass --config PATH and/or --experiment NAME".into(),
        }));
    }

    let mut cfg = match override_exp {
        Some(exp) => parse_config_override(&text, Some(exp))?,
        None => parse_config(&text)?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| runner::RunError::Numeric(e.to_string()))?;
    }

    let outputs = runner::run(&cfg)?;
    for path in &outputs {
        println!("wrote {}", path.display());
    }
    Ok(())
}
