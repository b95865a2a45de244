use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fkcouple::{config::Kind, report, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fkcouple", version = fkcouple::VERSION, about = "Reflection-coupling Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and resolve a config, check its field, print the resolved config.
    Validate { config: PathBuf },
    /// Run an experiment (TOML config or a previous summary.json).
    Run {
        config: PathBuf,
        /// Output root; overrides output.dir and $FKCOUPLE_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores); results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run an oracle-table config.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive the fits of a finished run from its results.csv.
    Report { run_dir: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?.resolve()?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serialises"));
        }
        Command::Run { config, out, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let dir = fkcouple::run(&cfg, out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Oracle { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            if cfg.kind != Kind::Oracle {
                return Err(CliError::Config(format!(
                    "expected kind = \"oracle\", got \"{}\"",
                    cfg.kind.as_str()
                )));
            }
            let dir = fkcouple::run(&cfg, out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Report { run_dir } => {
            let fits = report::report(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&fits).expect("fits serialise"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).expect("record serialises"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
