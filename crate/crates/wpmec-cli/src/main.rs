use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use wpmec_cli::{
    cmd_evaluate, cmd_sweep, cmd_train, io, EvaluateArgs, PolicyName, SweepArgs, SweepAxis,
    TrainArgs,
};

/// Simulator and optimization harness for a multi-UAV wireless-powered
/// mobile-edge-computing network.
#[derive(Parser)]
#[command(name = "wpmec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the UAV policies and write reward logs plus a checkpoint.
    Train {
        /// JSON config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed override for the run.
        #[arg(long)]
        seed: Option<u64>,
        /// Episode-count override.
        #[arg(long)]
        episodes: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Train this many consecutive seeds concurrently.
        #[arg(long, default_value_t = 1)]
        parallel_seeds: usize,
    },
    /// Evaluate a policy from a checkpoint over seeded episodes.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint written by `train`; not needed for `greedy`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// One of: mural, nsd, oo, greedy.
        #[arg(long)]
        policy: PolicyName,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel_seeds: usize,
    },
    /// Train and evaluate across a population axis, one CSV row per
    /// (axis value, policy, metric).
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of: devices, aps, uavs.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values, e.g. 20,40,60.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
        /// Comma-separated policies to compare.
        #[arg(long, value_delimiter = ',', default_value = "mural,nsd,oo,greedy")]
        policies: Vec<PolicyName>,
        /// Evaluation episodes per sweep point.
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel_seeds: usize,
    },
}

impl clap::builder::ValueParserFactory for PolicyName {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<PolicyName>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for SweepAxis {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<SweepAxis>().map_err(|e| e.to_string()))
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            config,
            seed,
            episodes,
            out,
            parallel_seeds,
        } => {
            let mut cfg = io::load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            if let Some(episodes) = episodes {
                cfg.episodes = episodes;
            }
            let outcome = cmd_train(&TrainArgs {
                cfg,
                out,
                parallel_seeds,
            })
            .context("train failed")?;
            println!(
                "wrote {} and {} checkpoint(s)",
                outcome.rewards_csv.display(),
                outcome.checkpoints.len()
            );
        }
        Command::Evaluate {
            config,
            checkpoint,
            policy,
            episodes,
            seed,
            out,
            parallel_seeds,
        } => {
            let mut cfg = io::load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            let outcome = cmd_evaluate(&EvaluateArgs {
                cfg,
                checkpoint,
                policy,
                episodes,
                out,
                parallel_seeds,
            })
            .context("evaluate failed")?;
            println!("wrote {}", outcome.metrics_csv.display());
        }
        Command::Sweep {
            config,
            axis,
            values,
            policies,
            episodes,
            seed,
            out,
            parallel_seeds,
        } => {
            let mut cfg = io::load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            let outcome = cmd_sweep(&SweepArgs {
                cfg,
                axis,
                values,
                policies,
                episodes,
                out,
                parallel_seeds,
            })
            .context("sweep failed")?;
            println!("wrote {}", outcome.sweep_csv.display());
        }
    }
    Ok(())
}
