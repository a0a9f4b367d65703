use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cmeasure::config::parse_config;
use cmeasure::runner::{run, Command};

/// Counting-process change-of-measure toolkit.
#[derive(Debug, Parser)]
#[command(name = "cmeasure", version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,

    /// Scenario file (TOML).
    config: PathBuf,

    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for the run's reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    Simulate,
    Weight,
    Check,
    VerifyMartingale,
    Explosion,
    ImportanceSample,
    Oracles,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Simulate => Command::Simulate,
            Subcommand::Weight => Command::Weight,
            Subcommand::Check => Command::Check,
            Subcommand::VerifyMartingale => Command::VerifyMartingale,
            Subcommand::Explosion => Command::Explosion,
            Subcommand::ImportanceSample => Command::ImportanceSample,
            Subcommand::Oracles => Command::Oracles,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("CMEASURE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("CMEASURE_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(cli: Cli) -> Result<i32, String> {
    configure_threads()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let mut config = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let outcome = run(cli.command.into(), &config, &cli.out).map_err(|e| e.to_string())?;
    for check in &outcome.summary.checks {
        match check.std_error {
            Some(se) => println!("{}\t{}\t{} ± {}", check.criterion_id, check.verdict, check.value, se),
            None => println!("{}\t{}\t{}", check.criterion_id, check.verdict, check.value),
        }
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
