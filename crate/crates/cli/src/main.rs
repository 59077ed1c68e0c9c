mod config;
mod error;
mod experiments;
mod output;
mod registry;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RawConfig;
use crate::error::{CliError, EXIT_DIVERGENCE, EXIT_OK};
use crate::output::{write_outputs, Outcome};

#[derive(Debug, Parser)]
#[command(name = "dyn-nn-lab", version, about = "Run dynamical-systems experiments on neural networks from flat configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// List experiments and every id a config may name, or the keys of one experiment.
    List { experiment: Option<String> },
}

fn run(path: &Path) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Setup(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
    let raw = RawConfig::parse(&text, &base)?;
    let id = raw.get("experiment").unwrap_or("");
    let Some(exp) = experiments::find(id) else {
        let known: Vec<&str> = experiments::EXPERIMENTS.iter().map(|e| e.id).collect();
        let message = if id.is_empty() { "missing".to_string() } else { format!("unknown experiment '{id}'") };
        return Err(CliError::config("experiment", format!("{message} (expected one of {})", known.join(", "))));
    };
    let cfg = raw.resolve(&exp.schema())?;
    let plot = cfg.bool("plot")?;
    let outcome = match exp.run(&cfg) {
        Ok(o) => o,
        Err(e) if e.exit_code() == EXIT_DIVERGENCE => {
            // keep a record of the failed run next to any earlier outputs
            let failed = Outcome { divergence: Some(e.to_string()), ..Outcome::default() };
            let _ = write_outputs(&cfg, &failed, false);
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let written = write_outputs(&cfg, &outcome, plot)?;
    println!("experiment: {}", exp.id);
    for line in &outcome.summary {
        println!("{line}");
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(match &outcome.divergence {
        Some(d) => {
            eprintln!("divergence: {d}");
            EXIT_DIVERGENCE
        }
        None => EXIT_OK,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { experiment: None } => {
            print!("{}", registry::render());
            ExitCode::SUCCESS
        }
        Command::List { experiment: Some(id) } => match experiments::find(&id) {
            Some(e) => {
                print!("{}", registry::render_keys(e));
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: config key 'experiment': unknown experiment '{id}'");
                ExitCode::from(error::EXIT_CONFIG)
            }
        },
        Command::Run { config } => match run(&config) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            }
        },
    }
}
