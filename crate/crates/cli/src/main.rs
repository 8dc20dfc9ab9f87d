use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradelast_cli::check::run_checks;
use gradelast_cli::commands::{cmd_compare, cmd_converge, cmd_homogenize, cmd_run};
use gradelast_cli::{CliError, RunSpec};

/// Energy-stable dynamics of a three-well gradient elastic solid.
#[derive(Parser)]
#[command(name = "gradelast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step one run and write energy, residual, snapshot and restart files.
    Run { spec: PathBuf },
    /// Temporal convergence study against a fine-step reference.
    Converge {
        spec: PathBuf,
        /// Step sizes; overrides `converge.dts`.
        #[arg(long = "dt", num_args = 1..)]
        dts: Vec<f64>,
    },
    /// Newton iteration histogram over schemes and step sizes.
    Compare {
        spec: PathBuf,
        #[arg(long = "scheme", num_args = 1..)]
        schemes: Vec<String>,
        #[arg(long = "dt", num_args = 1..)]
        dts: Vec<f64>,
    },
    /// Effective response of a periodic cell along a loading path.
    Homogenize { spec: PathBuf },
    /// Quick property checks of the energy, schemes and splines.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &PathBuf) -> Result<RunSpec, CliError> {
    let spec = RunSpec::load(path)?;
    if spec.threads > 0 {
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(spec.threads).build_global();
    }
    Ok(spec)
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Run { spec } => cmd_run(&load(&spec)?),
        Command::Converge { spec, dts } => cmd_converge(&load(&spec)?, &dts),
        Command::Compare { spec, schemes, dts } => cmd_compare(&load(&spec)?, &schemes, &dts),
        Command::Homogenize { spec } => cmd_homogenize(&load(&spec)?),
        Command::Check { seed } => {
            let results = run_checks(seed);
            let text: String = results.iter().map(|r| format!("{r}\n")).collect();
            if results.iter().all(|r| r.passed()) {
                Ok(text)
            } else {
                Err(CliError::Solver(text))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
