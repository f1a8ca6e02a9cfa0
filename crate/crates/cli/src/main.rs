use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use horoprox_cli::commands::{cmd_check, cmd_compare_exact, cmd_solve, EXIT_INVALID};

#[derive(Debug, Parser)]
#[command(name = "bhppm", version, about = "Busemann hybrid projection-proximal point solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write the iteration trace as CSV.
    Solve {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a property suite: geometry, busemann, subdiff, solver, counterexamples or all.
    Check {
        #[arg(value_parser = ["geometry", "busemann", "subdiff", "solver", "counterexamples", "all"])]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Compare the solver with σ = 0 against the exact proximal point iteration.
    CompareExact { spec: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID as u8) } else { ExitCode::SUCCESS };
        }
    };
    let (mut out, mut err) = (io::stdout(), io::stderr());
    let code = match cli.command {
        Command::Solve { spec, output } => cmd_solve(&spec, &output, &mut out, &mut err),
        Command::Check { suite, seed } => cmd_check(&suite, seed, &mut out, &mut err),
        Command::CompareExact { spec } => cmd_compare_exact(&spec, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
