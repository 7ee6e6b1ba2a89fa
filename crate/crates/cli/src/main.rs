use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ftwist_cli::acceptance;
use ftwist_cli::config::ExperimentConfig;
use ftwist_cli::experiments::{self, Experiment};

#[derive(Parser)]
#[command(name = "ftwist", version, about = "Twist maps realized as Finsler geodesic flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json plus its data files.
    Run {
        experiment: Experiment,
        /// JSON config; defaults are used for absent fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config field, e.g. `--set grid.nx=64`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance suite.
    Verify,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            experiment,
            config,
            set,
            out,
        } => {
            let config = ExperimentConfig::load(config.as_deref(), &set)?;
            let report = experiments::run(experiment, &config, &out)?;
            for (name, c) in &report.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("[{tag}] {name}: {:e} {} {:e}", c.value, c.relation.symbol(), c.bound);
            }
            println!("wrote {}", out.join("report.json").display());
            Ok(report.passed)
        }
        Command::Verify => {
            let outcomes = acceptance::run_all(|o| println!("{}", o.line()));
            let passed = outcomes.iter().filter(|o| o.passed()).count();
            println!("{passed}/{} criteria passed", outcomes.len());
            Ok(passed == outcomes.len())
        }
    }
}
