//! Command-line front end for the CAFFEINE experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "caffeine",
    version,
    about = "Counterdiabatic-inspired Floquet engineering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for independent jobs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Drive frequency as a multiple of ω₀ = 2π/τ; overrides the config.
    #[arg(long)]
    pub omega_mult: Option<f64>,
    /// Output directory; overrides the config.
    #[arg(long, env = "CAFFEINE_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-qubit state preparation, one report entry per arm.
    StatePrep {
        #[command(flatten)]
        common: Common,
        /// Run only these arms (repeatable), e.g. `analytical-floquet`.
        #[arg(long = "arm")]
        arms: Vec<String>,
    },
    /// Ising annealing grid of final-energy gaps.
    Anneal {
        #[command(flatten)]
        common: Common,
    },
    /// Segment-by-segment learning of the drive coefficients.
    LearnAgp {
        #[command(flatten)]
        common: Common,
    },
    /// Cost landscape on a grid of γ or β values.
    Landscape {
        #[command(flatten)]
        common: Common,
        /// `gamma` or `beta`; overrides the config.
        #[arg(long)]
        kind: Option<String>,
        /// Scan axis `[index:]lo:hi:points` (repeatable); overrides the config.
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
    /// Reference run under the exact counterdiabatic Hamiltonian.
    ExactCd {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::StatePrep { common, arms } => commands::state_prep(&common, &arms),
        Command::Anneal { common } => commands::anneal(&common),
        Command::LearnAgp { common } => commands::learn_agp(&common),
        Command::Landscape { common, kind, axes } => {
            commands::landscape(&common, kind.as_deref(), &axes)
        }
        Command::ExactCd { common } => commands::exact_cd(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
