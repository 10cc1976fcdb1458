use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdmlink_cli::config::schema_json;
use sdmlink_cli::{run, CliError, Experiment, ExperimentConfig, Result};

/// Bidirectional SDM link experiments.
///
/// Exit status: 0 when the run completed and its checks held, 1 on a
/// configuration or I/O error, 2 when a check failed.
#[derive(Parser)]
#[command(name = "sdmlink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    BerGrid(RunArgs),
    BackwardPowerSweep(RunArgs),
    TapCountSweep(RunArgs),
    DriftTracking(RunArgs),
    BudgetCheck(RunArgs),
    ComplexityTable(RunArgs),
    /// Print the JSON schema of the config file.
    Schema,
    /// Print the default config of an experiment.
    DefaultConfig {
        #[arg(value_enum)]
        experiment: Experiment,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; its `experiment` field must match the command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Required unless the config file provides it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Symbols per channel.
    #[arg(long)]
    symbols: Option<usize>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    parallel: Option<usize>,
}

fn build_config(exp: Experiment, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let c = ExperimentConfig::load(p)?;
            if c.experiment != exp {
                return Err(CliError::Config(format!(
                    "config is for {}, command is {}",
                    c.experiment.name(),
                    exp.name()
                )));
            }
            c
        }
        None => {
            let seed = a
                .seed
                .ok_or_else(|| CliError::Config("--seed is required without --config".into()))?;
            ExperimentConfig::new(exp, seed)
        }
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.output.dir = o.clone();
    }
    if let Some(n) = a.symbols {
        cfg.symbols = n;
    }
    if let Some(p) = a.parallel {
        cfg.parallel = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(exp: Experiment, a: &RunArgs) -> Result<bool> {
    let cfg = build_config(exp, a)?;
    let out = run(&cfg)?;
    for p in out.write(&cfg)? {
        eprintln!("wrote {}", p.display());
    }
    for a in &out.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    Ok(out.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, args) = match &cli.command {
        Command::Schema => {
            return match schema_json() {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            };
        }
        Command::DefaultConfig { experiment, seed } => {
            return match ExperimentConfig::new(*experiment, *seed).to_json() {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            };
        }
        Command::BerGrid(a) => (Experiment::BerGrid, a),
        Command::BackwardPowerSweep(a) => (Experiment::BackwardPowerSweep, a),
        Command::TapCountSweep(a) => (Experiment::TapCountSweep, a),
        Command::DriftTracking(a) => (Experiment::DriftTracking, a),
        Command::BudgetCheck(a) => (Experiment::BudgetCheck, a),
        Command::ComplexityTable(a) => (Experiment::ComplexityTable, a),
    };
    match execute(exp, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
