use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rabi::{ConfigError, ExperimentConfig, Mode, RunError};

/// Simulate, estimate and analyse photon-counting records of a driven
/// two-level atom.
#[derive(Debug, Parser)]
#[command(name = "rabi", version)]
struct Cli {
    /// simulate-record | posterior | conditional-state | info-gain | wtd
    mode: String,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mode: Mode = cli.mode.parse().map_err(|_| ConfigError::BadValue { key: "mode", value: cli.mode.clone() })?;
    let text = std::fs::read_to_string(&cli.config).map_err(|source| RunError::Io { path: cli.config.clone(), source })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    match cfg.mode {
        Some(m) if m != mode => {
            return Err(ConfigError::ModeMismatch { config: m.as_str().into(), cli: mode.as_str().into() }.into());
        }
        _ => cfg.mode = Some(mode),
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            let msg = first.replace('"', "'");
            eprintln!("error code=usage message=\"{msg}\"");
            return ExitCode::from(2);
        }
    };
    match resolve(&cli).and_then(|cfg| rabi::run(&cfg)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
