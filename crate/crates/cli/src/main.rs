mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symspinor::Error;

use crate::config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "symspinor",
    version,
    about = "Verification pipelines for symplectic spinors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Fiber algebra and trace identity suites.
    VerifyAlgebra,
    /// Heat coefficients a0, a2, a4 by both paths.
    Heat,
    /// Exact CP1 asymptotics against a fit of the heat trace.
    Cp1,
    /// Spectral against geodesic distance on a surface mesh.
    Distance,
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InsufficientCutoff { .. }
            | Error::LevelAboveCutoff { .. }
            | Error::UnsupportedModel(_)
            | Error::DimensionMismatch(_)
            | Error::AxisOutOfRange { .. }
            | Error::NotUnitaryAlgebra { .. }
            | Error::OrderBeyondBernoulli { .. }
    )
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    let outcome = match cli.command {
        Command::VerifyAlgebra => commands::verify_algebra(&cfg)?,
        Command::Heat => commands::heat(&cfg)?,
        Command::Cp1 => commands::cp1(&cfg)?,
        Command::Distance => commands::distance(&cfg)?,
    };
    let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    let write = |path: &std::path::Path, body: &str| {
        std::fs::write(path, body).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    };
    match &cfg.out {
        Some(path) => {
            write(path, &text)?;
            if let Some(csv) = &outcome.csv {
                write(&path.with_extension("csv"), csv)?;
            }
        }
        None => println!("{text}"),
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) {
                EXIT_CONFIG
            } else {
                EXIT_FAILED
            })
        }
    }
}
