use std::time::Instant;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use wpmec_core::config::SimConfig;
use wpmec_core::mtdrl::run_training;
use wpmec_core::mural::{evaluate, RunPolicy};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mu: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let lam: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(7);
    let cfg = SimConfig { rng_seed: seed, inv_temperature: mu, distill_weight: lam,
        explore_start: 0.4, explore_anneal_frac: 0.5, ..SimConfig::default() }.validate().unwrap();
    let t0 = Instant::now();
    let (nets, log) = run_training(cfg.clone()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let rewards: Vec<f64> = log.iter().map(|r| r.reward).collect();
    let (f50, l50) = (mean(&rewards[..50]), mean(&rewards[150..]));
    println!("mu={mu} lam={lam} seed={seed}: wall {dt:.0}s first50 {f50:.2} last50 {l50:.2} ratio {:.3}", l50/f50);
    let mut line = String::new();
    for (name, policy) in [("mural", RunPolicy::Mural(&nets)), ("nsd", RunPolicy::Nsd(&nets)), ("oo", RunPolicy::Oo(&nets)), ("greedy", RunPolicy::Greedy)] {
        let ms = evaluate(policy, 10, &cfg, &mut ChaCha12Rng::seed_from_u64(1000));
        let eta = ms.iter().map(|m| m.mean_efficiency).sum::<f64>() / ms.len() as f64;
        line += &format!("{name} {eta:.3e}  ");
    }
    println!("  {line}");
}
