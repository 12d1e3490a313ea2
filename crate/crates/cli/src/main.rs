use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfs_core::harness::{self, ExperimentConfig, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

/// Mean-field particle experiments with common noise.
#[derive(Parser)]
#[command(name = "mfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a previous run's manifest.json.
    Run {
        path: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the registered kernel builders and their parameters.
    Models,
    /// Validate a config without running it.
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Models => {
            print!("{}", harness::list_models());
            EXIT_PASS
        }
        Command::Validate { path } => match std::fs::read_to_string(&path)
            .map_err(mfs_core::Error::from)
            .and_then(|t| ExperimentConfig::parse(&t))
        {
            Ok(_) => {
                println!("{}: ok", path.display());
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                EXIT_ERROR
            }
        },
        Command::Run { path, out } => {
            let result = harness::threads_from_env().and_then(|t| harness::run_path(&path, out.as_deref(), t));
            match result {
                Ok(outcome) => {
                    for v in &outcome.report.verdicts {
                        println!(
                            "{} {} value={:e} tolerance={:e}",
                            if v.pass { "PASS" } else { "FAIL" },
                            v.check,
                            v.value,
                            v.tolerance
                        );
                    }
                    println!("wrote {}", outcome.output_dir.display());
                    let code = outcome.exit_code();
                    if code == EXIT_FAIL {
                        eprintln!("one or more verdicts failed");
                    }
                    code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
