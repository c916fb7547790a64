//! `dwpop`: run the domain-wall device and crossbar PCA experiments from a
//! TOML configuration and write plot-ready comma-separated tables.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Output, UsageError};
use config::{Config, DatasetSource};

#[derive(Parser, Debug)]
#[command(name = "dwpop", version, about = "Domain-wall synapse simulations and population-coded PCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// First seed: experiment seeds become K, K+1, ...; device and wire
    /// seeds start at K.
    #[arg(long, global = true)]
    seed_base: Option<u64>,

    /// Mouse protein expression table (comma-separated with header).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Wall velocity versus current density and the critical current per tilt spread.
    Velocity,
    /// Record pulse staircases for a device library.
    Calibrate,
    /// Train one network (first configured seed).
    Train,
    /// Monte Carlo over all configured seeds.
    Montecarlo,
    /// Monte Carlo for every configured population size.
    SweepPopulation,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Velocity => "velocity",
            Command::Calibrate => "calibrate",
            Command::Train => "train",
            Command::Montecarlo => "montecarlo",
            Command::SweepPopulation => "sweep-population",
        }
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => Config::default(),
    };
    if let Some(k) = cli.seed_base {
        let n = cfg.experiment.seeds.len() as u64;
        cfg.experiment.seeds = (k..k + n).collect();
        cfg.library.seed_base = k;
        cfg.disorder.seed = k;
    }
    if let Some(p) = &cli.dataset {
        cfg.dataset.source = DatasetSource::File;
        cfg.dataset.path = Some(p.clone());
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate().map_err(|e| UsageError(format!("{e:#}")))?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(UsageError("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let seeds: Vec<u64> = match cli.command {
        Command::Velocity => vec![cfg.disorder.seed],
        Command::Calibrate => (0..cfg.library.count as u64).map(|k| cfg.library.seed_base + k).collect(),
        Command::Train => cfg.experiment.seeds.iter().take(1).copied().collect(),
        Command::Montecarlo | Command::SweepPopulation => cfg.experiment.seeds.clone(),
    };
    let out = Output::new(&dir, cli.command.name(), &cfg, &seeds)?;
    match cli.command {
        Command::Velocity => commands::velocity(&cfg, &out),
        Command::Calibrate => commands::calibrate(&cfg, &out).map(|_| ()),
        Command::Train => commands::train(&cfg, &out),
        Command::Montecarlo => commands::montecarlo(&cfg, &out),
        Command::SweepPopulation => commands::sweep(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
