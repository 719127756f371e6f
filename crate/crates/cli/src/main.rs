use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracvar_cli::{run, RunOptions};

#[derive(Parser)]
#[command(
    name = "fracvar",
    version,
    about = "Fractional variational problems from JSON files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in a problem file.
    Run {
        problem: PathBuf,
        /// Output directory for summary.json, timings.json and CSV tables.
        #[arg(long)]
        out: PathBuf,
        /// Override grid.n_cells from the problem file.
        #[arg(long = "n-cells")]
        n_cells: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        problem,
        out,
        n_cells,
        quiet,
    } = cli.command;
    if !quiet && std::env::var_os("FRACVAR_SEED").is_some() {
        eprintln!("note: FRACVAR_SEED is ignored; all tasks are deterministic");
    }
    match run(&problem, &out, RunOptions { n_cells, quiet }) {
        Ok(outcome) => ExitCode::from(outcome.exit_code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
