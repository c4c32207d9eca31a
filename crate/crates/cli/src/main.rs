//! Command-line front end for the witness simulation library.

mod config;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "witsim",
    about = "evolve open-system models and track entanglement and nonclassicality witnesses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// scenario config file (flat key = value lines)
    config: PathBuf,
    /// override the output directory from the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// override the Monte Carlo seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// override the integrator step from the config
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// evaluate witness trajectories and write CSV artifacts
    Run(Common),
    /// cross-check the evolution paths and closed forms against each other
    Verify(Common),
    /// print the closed-form vanishing and rebirth times
    SvTimes(Common),
}

impl Common {
    fn load(&self) -> Result<config::ScenarioConfig> {
        let mut cfg = config::load_config(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dt) = self.dt {
            anyhow::ensure!(dt > 0.0 && dt.is_finite(), "--dt must be positive");
            cfg.dt = dt;
        }
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(c) => scenario::run(&c.load()?),
        Command::Verify(c) => scenario::verify(&c.load()?),
        Command::SvTimes(c) => scenario::sv_times(&c.load()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            // clap exits with 2 by default, which this tool reserves for
            // failed comparisons; usage errors report as plain errors
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
