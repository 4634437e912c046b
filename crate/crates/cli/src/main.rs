use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_core::config::Config;
use ris_core::harness::{run_experiment, ExperimentKind, ExperimentSpec};

/// Load optimization for a link assisted by a reconfigurable intelligent surface.
#[derive(Parser)]
#[command(name = "ris-opt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Objective trace of the coupling-aware optimizer per (N_RIS, d) pair.
    Convergence(Common),
    /// Gain per strategy versus element spacing at fixed N_RIS.
    SweepDistance(Common),
    /// Gain per strategy versus N_RIS at fixed surface area.
    SweepArea(Common),
    /// Run the validation checks; exits nonzero if any fails.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "paper-28ghz")]
    Paper28Ghz,
}

#[derive(Args)]
struct Common {
    /// `key = value` file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "paper-28ghz")]
    preset: Preset,
}

fn build_spec(kind: ExperimentKind, common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match common.preset {
        Preset::Paper28Ghz => ExperimentSpec::paper_28ghz(kind),
    };
    if let Some(path) = &common.config {
        let cfg = Config::load(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_to_spec(&mut spec)
            .with_context(|| format!("applying {}", path.display()))?;
    }
    spec.output = common.out.clone();
    Ok(spec)
}

fn execute(kind: ExperimentKind, common: &Common) -> Result<bool> {
    let spec = build_spec(kind, common)?;
    let out: Box<dyn Write> = match &spec.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    Ok(run_experiment(&spec, out)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Convergence(c) => (ExperimentKind::Convergence, c),
        Command::SweepDistance(c) => (ExperimentKind::DistanceSweep, c),
        Command::SweepArea(c) => (ExperimentKind::ConstantAreaSweep, c),
        Command::Validate(c) => (ExperimentKind::Validate, c),
    };
    match execute(kind, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
