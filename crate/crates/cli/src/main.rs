use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use delay_hopf_cli::run::{run, Command, Options};
use delay_hopf_cli::{config, CliError};

/// Hopf bifurcation analysis and simulation of a delayed
/// reaction-diffusion-advection model.
#[derive(Debug, Parser)]
#[command(name = "delay-hopf", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (`section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Worker threads for sweeps and validation.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = cli.config.as_deref().map(config::load).transpose()?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run(cli.command, cfg.as_ref(), &Options { out, plot: cli.plot })?;
    print!("{}", report.text);
    Ok(report.violations)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .init();
    match execute(&cli) {
        Ok(v) if v.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            let e = CliError::Invariant(v.join("; "));
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
