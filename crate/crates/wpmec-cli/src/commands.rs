//! The three run modes: `train`, `evaluate` and `sweep`. Every command
//! is deterministic given (config, seed); concurrent seeds run with
//! isolated state and their outputs merge in ascending seed order.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use wpmec_core::config::SimConfig;
use wpmec_core::mtdrl::{Trainer, TrainRecord};
use wpmec_core::mural::{evaluate, EpisodeMetrics};

use crate::io::{self, fmt_f64};
use crate::manifest::RunManifest;
use crate::PolicyName;

/// Offset between a run's base seed and the seed of its evaluation
/// stream, so training and evaluation randomness never alias.
const EVAL_SEED_OFFSET: u64 = 0x00c0_ffee;

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub cfg: SimConfig,
    pub out: PathBuf,
    pub parallel_seeds: usize,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub rewards_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub logs: Vec<(u64, Vec<TrainRecord>)>,
}

/// Trains for `cfg.episodes` episodes per seed, writing the per-episode
/// reward log, a plateau summary and one checkpoint per seed.
pub fn cmd_train(args: &TrainArgs) -> anyhow::Result<TrainOutcome> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut manifest = RunManifest::new("train", args.cfg.rng_seed, args.cfg.clone());
    let t0 = Instant::now();

    let seeds: Vec<u64> = (0..args.parallel_seeds.max(1) as u64)
        .map(|i| args.cfg.rng_seed + i)
        .collect();
    let runs = run_per_seed(&seeds, |seed| {
        let cfg = SimConfig {
            rng_seed: seed,
            ..args.cfg.clone()
        };
        let episodes = cfg.episodes;
        let mut trainer = Trainer::new(cfg);
        trainer
            .run(episodes)
            .map(|()| trainer)
            .map_err(anyhow::Error::new)
    })?;

    // Reward log: the bare spec columns for a single seed; a leading
    // seed column when several seeds were merged.
    let multi = seeds.len() > 1;
    let rewards_csv = args.out.join("rewards.csv");
    let header = if multi {
        "seed,episode,reward,loss_task_mean,loss_shared"
    } else {
        "episode,reward,loss_task_mean,loss_shared"
    };
    let mut rows = Vec::new();
    for (seed, trainer) in seeds.iter().zip(&runs) {
        for r in &trainer.log {
            let mut row = Vec::with_capacity(5);
            if multi {
                row.push(seed.to_string());
            }
            row.extend([
                r.episode.to_string(),
                fmt_f64(r.reward),
                fmt_f64(r.loss_task_mean),
                fmt_f64(r.loss_shared),
            ]);
            rows.push(row);
        }
    }
    io::write_csv(&rewards_csv, header, &rows)?;

    let summary_csv = args.out.join("summary.csv");
    let rows: Vec<Vec<String>> = seeds
        .iter()
        .zip(&runs)
        .map(|(seed, trainer)| {
            let rewards: Vec<f64> = trainer.log.iter().map(|r| r.reward).collect();
            let s = summarize(&rewards);
            vec![
                seed.to_string(),
                rewards.len().to_string(),
                s.episodes_to_plateau.to_string(),
                fmt_f64(s.first_window_mean),
                fmt_f64(s.last_window_mean),
            ]
        })
        .collect();
    io::write_csv(
        &summary_csv,
        "seed,episodes,episodes_to_plateau,first50_mean,last50_mean",
        &rows,
    )?;

    let mut checkpoints = Vec::new();
    for (seed, trainer) in seeds.iter().zip(&runs) {
        let path = args.out.join(format!("checkpoint_{seed}.json"));
        io::save_checkpoint(&path, &trainer.checkpoint())?;
        checkpoints.push(path);
    }

    let mut outputs = vec!["rewards.csv".to_string(), "summary.csv".to_string()];
    outputs.extend(seeds.iter().map(|s| format!("checkpoint_{s}.json")));
    manifest.finish(t0.elapsed().as_secs_f64(), outputs);
    manifest.write(&args.out)?;

    Ok(TrainOutcome {
        rewards_csv,
        summary_csv,
        checkpoints,
        logs: seeds
            .iter()
            .copied()
            .zip(runs.into_iter().map(|t| t.log))
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub cfg: SimConfig,
    pub checkpoint: Option<PathBuf>,
    pub policy: PolicyName,
    pub episodes: usize,
    pub out: PathBuf,
    pub parallel_seeds: usize,
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub metrics_csv: PathBuf,
    pub per_seed: Vec<(u64, Vec<EpisodeMetrics>)>,
}

/// Evaluates a policy over seeded fresh episodes, one row per episode:
/// per-slot means of efficiency, computed bits and consumed energy.
pub fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<EvaluateOutcome> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let nets = match (&args.checkpoint, args.policy.needs_checkpoint()) {
        (Some(path), _) => {
            let ck = io::load_checkpoint(path)?;
            io::check_compat(&ck, &args.cfg)?;
            Some(ck.nets)
        }
        (None, true) => anyhow::bail!(
            "policy {} requires --checkpoint",
            args.policy.as_str()
        ),
        (None, false) => None,
    };

    let mut manifest = RunManifest::new("evaluate", args.cfg.rng_seed, args.cfg.clone());
    let t0 = Instant::now();
    let seeds: Vec<u64> = (0..args.parallel_seeds.max(1) as u64)
        .map(|i| args.cfg.rng_seed + i)
        .collect();
    let per_seed = run_per_seed(&seeds, |seed| {
        let policy = args.policy.bind(nets.as_ref())?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(EVAL_SEED_OFFSET));
        Ok(evaluate(policy, args.episodes, &args.cfg, &mut rng))
    })?;

    let multi = seeds.len() > 1;
    let header = if multi {
        "seed,episode,avg_efficiency,avg_bits,avg_energy"
    } else {
        "episode,avg_efficiency,avg_bits,avg_energy"
    };
    let mut rows = Vec::new();
    for (seed, metrics) in seeds.iter().zip(&per_seed) {
        for (episode, m) in metrics.iter().enumerate() {
            let mut row = Vec::with_capacity(5);
            if multi {
                row.push(seed.to_string());
            }
            row.extend([
                episode.to_string(),
                fmt_f64(m.mean_efficiency),
                fmt_f64(m.total_bits / m.slots as f64),
                fmt_f64(m.total_energy / m.slots as f64),
            ]);
            rows.push(row);
        }
    }
    let metrics_csv = args.out.join("metrics.csv");
    io::write_csv(&metrics_csv, header, &rows)?;
    manifest.finish(t0.elapsed().as_secs_f64(), vec!["metrics.csv".to_string()]);
    manifest.write(&args.out)?;

    Ok(EvaluateOutcome {
        metrics_csv,
        per_seed: seeds.into_iter().zip(per_seed).collect(),
    })
}

/// Sweep axis: which population count varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Devices,
    Aps,
    Uavs,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Devices => "devices",
            SweepAxis::Aps => "aps",
            SweepAxis::Uavs => "uavs",
        }
    }

    fn apply(&self, cfg: &SimConfig, value: usize) -> SimConfig {
        let mut cfg = cfg.clone();
        match self {
            SweepAxis::Devices => cfg.num_devices = value,
            SweepAxis::Aps => cfg.num_aps = value,
            SweepAxis::Uavs => cfg.num_uavs = value,
        }
        cfg
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "devices" => Ok(SweepAxis::Devices),
            "aps" => Ok(SweepAxis::Aps),
            "uavs" => Ok(SweepAxis::Uavs),
            other => anyhow::bail!("unknown axis '{other}' (expected devices, aps or uavs)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub cfg: SimConfig,
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub policies: Vec<PolicyName>,
    /// Evaluation episodes per (value, policy) point.
    pub episodes: usize,
    pub out: PathBuf,
    pub parallel_seeds: usize,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub sweep_csv: PathBuf,
    /// (seed, axis value, policy, [avg_efficiency, avg_bits, avg_energy]).
    pub points: Vec<(u64, usize, PolicyName, [f64; 3])>,
}

/// For each axis value: trains once per seed (when any selected policy
/// needs networks), evaluates every policy, and emits one long-format
/// row per (value, policy, metric).
pub fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<SweepOutcome> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    anyhow::ensure!(!args.values.is_empty(), "sweep needs at least one axis value");
    anyhow::ensure!(!args.policies.is_empty(), "sweep needs at least one policy");
    let mut manifest = RunManifest::new("sweep", args.cfg.rng_seed, args.cfg.clone());
    let t0 = Instant::now();
    let needs_training = args.policies.iter().any(|p| p.needs_checkpoint());

    let seeds: Vec<u64> = (0..args.parallel_seeds.max(1) as u64)
        .map(|i| args.cfg.rng_seed + i)
        .collect();
    let per_seed = run_per_seed(&seeds, |seed| {
        let mut points = Vec::new();
        for &value in &args.values {
            let cfg = args.axis.apply(&args.cfg, value);
            let cfg = SimConfig {
                rng_seed: seed,
                ..cfg
            }
            .validate()
            .map_err(anyhow::Error::new)?;
            let nets = if needs_training {
                let episodes = cfg.episodes;
                let mut trainer = Trainer::new(cfg.clone());
                trainer.run(episodes).map_err(anyhow::Error::new)?;
                Some(trainer.nets)
            } else {
                None
            };
            for &policy in &args.policies {
                let bound = policy.bind(nets.as_ref())?;
                let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(EVAL_SEED_OFFSET));
                let metrics = evaluate(bound, args.episodes, &cfg, &mut rng);
                let n = metrics.len() as f64;
                let eff = metrics.iter().map(|m| m.mean_efficiency).sum::<f64>() / n;
                let bits =
                    metrics.iter().map(|m| m.total_bits / m.slots as f64).sum::<f64>() / n;
                let energy =
                    metrics.iter().map(|m| m.total_energy / m.slots as f64).sum::<f64>() / n;
                points.push((value, policy, [eff, bits, energy]));
            }
        }
        Ok(points)
    })?;

    let multi = seeds.len() > 1;
    let header = if multi {
        "seed,axis,axis_value,policy,metric,value"
    } else {
        "axis,axis_value,policy,metric,value"
    };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (seed, seed_points) in seeds.iter().zip(&per_seed) {
        for &(value, policy, metrics) in seed_points {
            for (name, metric) in [
                ("avg_efficiency", metrics[0]),
                ("avg_bits", metrics[1]),
                ("avg_energy", metrics[2]),
            ] {
                let mut row = Vec::with_capacity(6);
                if multi {
                    row.push(seed.to_string());
                }
                row.extend([
                    args.axis.as_str().to_string(),
                    value.to_string(),
                    policy.as_str().to_string(),
                    name.to_string(),
                    fmt_f64(metric),
                ]);
                rows.push(row);
            }
            points.push((*seed, value, policy, metrics));
        }
    }
    let sweep_csv = args.out.join("sweep.csv");
    io::write_csv(&sweep_csv, header, &rows)?;
    manifest.finish(t0.elapsed().as_secs_f64(), vec!["sweep.csv".to_string()]);
    manifest.write(&args.out)?;

    Ok(SweepOutcome { sweep_csv, points })
}

/// Runs one closure per seed, on threads when more than one seed was
/// requested, and returns the results in seed order.
fn run_per_seed<T, F>(seeds: &[u64], job: F) -> anyhow::Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> anyhow::Result<T> + Sync,
{
    if seeds.len() == 1 {
        return Ok(vec![job(seeds[0])?]);
    }
    let mut slots: Vec<Option<anyhow::Result<T>>> = Vec::new();
    slots.resize_with(seeds.len(), || None);
    std::thread::scope(|scope| {
        for (slot, &seed) in slots.iter_mut().zip(seeds) {
            let job = &job;
            scope.spawn(move || {
                *slot = Some(job(seed));
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("seed job always writes its slot"))
        .collect()
}

/// Reward-curve summary supporting convergence-time reporting.
#[derive(Debug, Clone, Copy)]
pub struct CurveSummary {
    pub episodes_to_plateau: usize,
    pub first_window_mean: f64,
    pub last_window_mean: f64,
}

/// Windows are 50 episodes (shorter runs use their full length). The
/// plateau is the first episode whose trailing-window mean comes within
/// 5% of the final window's mean.
pub fn summarize(rewards: &[f64]) -> CurveSummary {
    let window = rewards.len().min(50).max(1);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let first = mean(&rewards[..window]);
    let last = mean(&rewards[rewards.len() - window..]);
    let mut plateau = rewards.len();
    for e in window..=rewards.len() {
        let trailing = mean(&rewards[e - window..e]);
        if (trailing - last).abs() <= 0.05 * last.abs() {
            plateau = e - 1;
            break;
        }
    }
    CurveSummary {
        episodes_to_plateau: plateau,
        first_window_mean: first,
        last_window_mean: last,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_finds_the_plateau() {
        // 60 episodes ramping then flat at 10.
        let mut rewards = vec![0.0; 10];
        rewards.extend(std::iter::repeat(10.0).take(50));
        let s = summarize(&rewards);
        assert_eq!(s.first_window_mean, mean(&rewards[..50]));
        assert_eq!(s.last_window_mean, mean(&rewards[10..]));
        assert!(s.episodes_to_plateau >= 49 && s.episodes_to_plateau < 60);
    }

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
