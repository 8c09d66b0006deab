use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gcm_cli::config::{Mode, RunConfig};
use gcm_cli::{cmd_propagate, cmd_reconstruct, cmd_report, cmd_simulate, MEASUREMENTS_FILE, PROPAGATED_FILE, TARGETS_FILE};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "gcm", version, about = "Coefficient reconstruction from single-direction backscatter data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults to the single-cube setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario used when no config file is given.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Noise seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Boundary data mode, overriding the configuration.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise noisy measurements.
    Simulate(Common),
    /// Propagate measurements to the bottom face of the box and locate targets.
    Propagate {
        #[command(flatten)]
        common: Common,
        /// Measurements; defaults to the one in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Reconstruct the coefficient from propagated data.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Propagated data; defaults to the one in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Located targets; defaults to the ones in the output directory.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Print the report of a finished run.
    Report {
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate(common) => cmd_simulate(&common.config()?, &common.out)?,
        Command::Propagate { common, input } => {
            let input = input.unwrap_or_else(|| common.out.join(MEASUREMENTS_FILE));
            let summary = cmd_propagate(&common.config()?, &input, &common.out)?;
            println!("{} target component(s) at k = {:.4}", summary.components, summary.locate_k);
        }
        Command::Reconstruct { common, input, targets } => {
            let input = input.unwrap_or_else(|| common.out.join(PROPAGATED_FILE));
            let targets = targets.unwrap_or_else(|| common.out.join(TARGETS_FILE));
            let report = cmd_reconstruct(&common.config()?, &input, &targets, &common.out)?;
            print!("{}", report.render());
        }
        Command::Report { out } => print!("{}", cmd_report(&out)?),
    }
    Ok(())
}
