use std::path::PathBuf;
use std::process::ExitCode;

use bgk_cli::CliError;
use clap::{Parser, Subcommand};

/// Multi-species BGK relaxation with velocity-dependent collision frequencies.
#[derive(Parser)]
#[command(name = "bgk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write the CSV time series (and snapshots if enabled).
    Run {
        config: PathBuf,
        /// Time series path, overriding `output.timeseries`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Validate a config and print it with every default filled in.
    CheckConfig { config: PathBuf },
    /// Solve the targets of the initial state and print their multipliers.
    SolveTarget { config: PathBuf },
    /// Print the version.
    Version,
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, output } => {
            let s = bgk_cli::run(&config, output.as_deref(), &mut std::io::stderr())?;
            println!("wrote {} records to {}", s.records, s.timeseries.display());
            for p in s.snapshots {
                println!("wrote snapshot {}", p.display());
            }
        }
        Command::CheckConfig { config } => print!("{}", bgk_cli::check_config(&config)?),
        Command::SolveTarget { config } => print!("{}", bgk_cli::solve_target(&config)?),
        Command::Version => println!("bgk {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
