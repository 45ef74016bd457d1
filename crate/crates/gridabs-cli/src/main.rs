//! Command-line front end: drives the abstraction/verification pipeline from
//! a JSON problem file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridabs::{estimate, parse_config, query_run, run, validate_model, Error};

#[derive(Parser)]
#[command(
    name = "gridabs",
    version,
    about = "Finite abstraction and verification of continuous-space Markov models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a problem file end to end and write all artifacts.
    Run {
        /// JSON problem file.
        config: PathBuf,
        /// Output directory (default: `out` next to the config).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Proceed even if the predicted grid exceeds the cell cap.
        #[arg(long)]
        force: bool,
    },
    /// Check a problem file and its model without running anything.
    Validate {
        config: PathBuf,
    },
    /// Predict grid sizes and build time for a problem file.
    Estimate {
        config: PathBuf,
    },
    /// Query a completed run directory at an initial state.
    Query {
        /// Directory produced by `run`.
        run_dir: PathBuf,
        /// Initial state as comma-separated coordinates, e.g. `20.0,5.0`.
        #[arg(long)]
        s0: String,
    },
}

fn read_config(path: &PathBuf) -> Result<gridabs::ProblemSpec, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn parse_s0(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(vec![format!("s0: `{t}` is not a number")]))
        })
        .collect()
}

fn configure_threads() {
    if let Ok(value) = std::env::var("FAUST_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, force } => {
            let spec = read_config(&config)?;
            let out_dir = out.unwrap_or_else(|| {
                config
                    .parent()
                    .map(|p| p.join("out"))
                    .unwrap_or_else(|| PathBuf::from("out"))
            });
            let report = run(&spec, &out_dir, force)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Validate { config } => {
            let spec = read_config(&config)?;
            let model = spec.to_model()?;
            let validation = validate_model(&model);
            if !validation.is_valid() {
                return Err(Error::Config(validation.violations));
            }
            println!("ok");
            Ok(())
        }
        Command::Estimate { config } => {
            let spec = read_config(&config)?;
            let preview = estimate(&spec)?;
            println!("{}", serde_json::to_string_pretty(&preview).expect("report serializes"));
            Ok(())
        }
        Command::Query { run_dir, s0 } => {
            let s0 = parse_s0(&s0)?;
            let hit = query_run(&run_dir, &s0)?;
            println!("{}", serde_json::to_string_pretty(&hit).expect("report serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
