use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ftmbqc::bounds::enumerate_saw;
use ftmbqc::decode::Backend;
use ftmbqc::experiment::{self, enumerate_points, ExperimentConfig, Layout};
use ftmbqc::Error;

#[derive(Parser)]
#[command(name = "ftmbqc", version, about = "Verifiable fault-tolerant MBQC experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Master seed, replacing the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per grid point, replacing the config's.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_parser = ["exact", "exact_subset_dp", "blossom", "greedy"])]
    backend: Option<String>,
    #[arg(long, value_parser = ["empty-vacuum", "fig2-pair"])]
    layout: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> ftmbqc::Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(b) = &self.backend {
            cfg.backend = b.parse::<Backend>()?;
        }
        if let Some(l) = &self.layout {
            cfg.layout = l.parse::<Layout>()?;
        }
        cfg.validate()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write summary.csv, MANIFEST.json and transcripts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Worker threads; defaults to all cores.
        #[arg(long, env = "FTMBQC_THREADS")]
        threads: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Regenerate one recorded trial and check it against the run's files.
    Replay {
        /// transcripts.jsonl of a finished run; MANIFEST.json must sit beside it.
        transcripts: PathBuf,
        #[arg(long)]
        trial: u64,
        /// Grid point index within the run.
        #[arg(long, default_value_t = 0)]
        point: u64,
        #[arg(long, env = "FTMBQC_THREADS")]
        threads: Option<usize>,
    },
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Count self-avoiding walks on the cubic lattice for lengths 1..=nu_max.
    EnumerateSaw {
        #[arg(long, default_value_t = 8)]
        nu_max: usize,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(cli: Cli) -> ftmbqc::Result<()> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            threads,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            let threads = threads.unwrap_or_else(default_threads);
            let out = experiment::run_experiment(&cfg, threads, &out_dir)?;
            eprintln!(
                "{} rows from {} points in {:.2}s -> {}",
                out.manifest.rows,
                out.manifest.points,
                out.manifest.wall_seconds,
                out_dir.display()
            );
            Ok(())
        }
        Command::Replay {
            transcripts,
            trial,
            point,
            threads,
        } => {
            let line = experiment::replay(&transcripts, point, trial, threads.unwrap_or_else(default_threads))?;
            println!("{line}");
            Ok(())
        }
        Command::ValidateConfig { config, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            let points = enumerate_points(&cfg)?;
            println!(
                "ok: {} with {} points, {} trials each, sha256 {}",
                cfg.experiment.name(),
                points.len(),
                cfg.trials,
                cfg.sha256()
            );
            Ok(())
        }
        Command::EnumerateSaw { nu_max } => {
            if nu_max > 12 {
                return Err(Error::Config(format!("nu_max {nu_max} too large for exhaustive enumeration (max 12)")));
            }
            println!("nu,count");
            for (i, c) in enumerate_saw(nu_max).iter().enumerate() {
                println!("{},{c}", i + 1);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let result = execute(Cli::parse());
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(experiment::exit_code(&result) as u8)
}
