use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaxbias::{json, parse_config, render, run, write_outputs, Analysis, CliError, Overrides};

#[derive(Parser)]
#[command(name = "relaxbias", version, about = "Bias analysis of binary exposure/outcome count tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis a config describes.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_name = "PATH")]
        draws_csv: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// Print the JSON report instead of the text rendering.
        #[arg(long)]
        json: bool,
    },
    /// Summarize a config's priors without touching its data.
    PriorCheck {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the config schema, or the report schema with --report.
    Schema {
        #[arg(long)]
        report: bool,
    },
}

fn load(path: &PathBuf) -> Result<relaxbias::RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, seed, draws, threads, draws_csv, report, json: as_json } => {
            let mut cfg = load(&config)?;
            cfg.apply(&Overrides { seed, draws, threads, draws_csv, report });
            relaxbias::prepare(&cfg)?;
            let outcome = run(&cfg)?;
            write_outputs(&cfg, &outcome)?;
            if as_json {
                print!("{}", json::to_string(&outcome.report));
            } else {
                print!("{}", render::text(&outcome.report));
            }
        }
        Command::PriorCheck { config, json: as_json } => {
            let mut cfg = load(&config)?;
            cfg.analysis = Analysis::PriorCheck;
            let outcome = run(&cfg)?;
            if as_json {
                print!("{}", json::to_string(&outcome.report));
            } else {
                print!("{}", render::text(&outcome.report));
            }
        }
        Command::Schema { report } => {
            print!("{}", if report { relaxbias::REPORT_SCHEMA } else { relaxbias::CONFIG_SCHEMA });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": { "category": e.category.name(), "message": e.message } });
            eprintln!("{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
