mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagcal_core::{Error, ErrorClass};

use config::ExperimentConfig;
use run::{Run, Verdict};

const EXIT_NUMERICAL: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

/// Config-driven runs of the calibration and volume-comparison experiments.
#[derive(Parser, Debug)]
#[command(name = "lagcal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the sampling seed; homotopy seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory; takes precedence over LAGCAL_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Complex and real sample pools.
    Sample,
    /// Monomial bases of the pluricanonical section spaces.
    Basis,
    /// Orthonormal Bergman data for each m.
    Bergman,
    /// Curvature sign report for FS and the Bergman-induced metrics.
    AssumeCheck,
    /// Pointwise bound profiles and comass checks.
    Calibrate,
    /// Seeded homotopies of the real locus and length comparison.
    Homotopy,
    /// Aggregate summary of the artifacts in the output directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Basis => "basis",
            Command::Bergman => "bergman",
            Command::AssumeCheck => "assume-check",
            Command::Calibrate => "calibrate",
            Command::Homotopy => "homotopy",
            Command::Report => "report",
        }
    }
}

fn exit_for(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => EXIT_VALIDATION,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Internal => EXIT_INTERNAL,
    }
}

fn run(cli: Cli) -> Result<Verdict, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    let cfg_path = cli.config.ok_or_else(|| Error::InvalidParameter("--config is required".into()))?;
    let cfg = ExperimentConfig::load(&cfg_path)?;
    let out = cli
        .out
        .or_else(|| std::env::var_os("LAGCAL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| cfg.output.dir.clone());
    if let Command::Report = cli.command {
        return run::report(&out);
    }
    Run::new(cfg, cli.seed, out)?.execute(cli.command.name())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(Verdict::Pass)) => ExitCode::SUCCESS,
        Ok(Ok(Verdict::Fail)) => ExitCode::from(EXIT_NUMERICAL),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
