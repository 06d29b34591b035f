//! Per-slot alternating optimization: device scheduling by threshold,
//! then alternation between the closed-form time-allocation solver and
//! the learned (or baseline) UAV policies until the slot decision stops
//! changing, then application to the world.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::mtdrl::{build_action_space, encode_observation, ActionSpace, PolicyNets};
use crate::num;
use crate::physics;
use crate::slot::{self, UavCandidate};
use crate::world::{init_world, Point, SlotMetrics, WorldState};

/// Which per-slot decision policy drives the UAVs.
#[derive(Debug, Clone, Copy)]
pub enum RunPolicy<'a> {
    /// Learned policy with threshold device scheduling and solved τ.
    Mural(&'a PolicyNets),
    /// Learned UAV policy, but no device scheduling: every device is
    /// type-1 and the time allocation is fixed at one half.
    Nsd(&'a PolicyNets),
    /// Learned UAV policy with local computation disabled everywhere.
    Oo(&'a PolicyNets),
    /// Untrained heuristic: serve while charged, fly toward the centroid
    /// of the nearest device cluster.
    Greedy,
}

impl<'a> RunPolicy<'a> {
    pub fn name(&self) -> &'static str {
        match self {
            RunPolicy::Mural(_) => "mural",
            RunPolicy::Nsd(_) => "nsd",
            RunPolicy::Oo(_) => "oo",
            RunPolicy::Greedy => "greedy",
        }
    }

    fn nets(&self) -> Option<&'a PolicyNets> {
        match self {
            RunPolicy::Mural(n) | RunPolicy::Nsd(n) | RunPolicy::Oo(n) => Some(n),
            RunPolicy::Greedy => None,
        }
    }

    fn force_all_type1(&self) -> bool {
        matches!(self, RunPolicy::Nsd(_))
    }

    fn fixed_tau(&self) -> Option<f64> {
        match self {
            RunPolicy::Nsd(_) => Some(0.5),
            _ => None,
        }
    }

    fn local_compute(&self) -> bool {
        !matches!(self, RunPolicy::Oo(_))
    }
}

/// Outcome of the inner alternation for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub tau: f64,
    pub alphas: Vec<bool>,
    pub betas: Vec<bool>,
    pub positions: Vec<Point>,
    pub inner_iters: usize,
    pub converged: bool,
}

/// Episode-level aggregates over the executed slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub slots: usize,
    /// Mean per-slot computation efficiency (bits/J).
    pub mean_efficiency: f64,
    pub total_bits: f64,
    pub total_energy: f64,
    /// Mean per-device per-slot harvested energy (J).
    pub mean_device_harvest: f64,
    pub penalties: usize,
    pub infeasible_slots: usize,
    pub converged_slots: usize,
}

/// Runs one slot end to end: mobility, scheduling, the alternating
/// τ/UAV-decision loop, and application.
pub fn run_slot<R: Rng + ?Sized>(
    world: &mut WorldState,
    policy: RunPolicy<'_>,
    space: &ActionSpace,
    cfg: &SimConfig,
    rng: &mut R,
) -> (SlotDecision, SlotMetrics) {
    slot::mobility_step(world, cfg, rng);
    slot::schedule_devices(world, policy.force_all_type1(), cfg);

    let observations: Option<Vec<Vec<f64>>> = policy.nets().map(|_| {
        (0..world.uavs.len())
            .map(|u| encode_observation(world, u, cfg))
            .collect()
    });

    // Inner alternation, initialized from the previous slot's decision.
    let mut cands: Vec<UavCandidate> = world
        .uavs
        .iter()
        .map(|u| UavCandidate {
            pos: u.pos,
            serving: u.serving,
            speed: u.speed,
        })
        .collect();
    let mut tau_prev: Option<f64> = None;
    let mut tau_value = 0.5;
    let mut infeasible = false;
    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.max_inner_iters {
        iters += 1;
        let plan = slot::build_plan(world, &cands, policy.local_compute(), cfg);
        (tau_value, infeasible) = match policy.fixed_tau() {
            Some(t) => (t, false),
            None => slot::choose_tau(&plan, cfg),
        };
        let next = propose_candidates(world, policy, &observations, space, cfg);
        let d_beta: f64 = cands
            .iter()
            .zip(next.iter())
            .map(|(a, b)| if a.serving != b.serving { 1.0 } else { 0.0 })
            .sum();
        let d_pos: f64 = cands
            .iter()
            .zip(next.iter())
            .map(|(a, b)| num::sqrt(a.pos.horizontal_dist2(&b.pos)))
            .sum();
        let d_tau = tau_prev.map_or(f64::INFINITY, |p| num::abs(tau_value - p));
        cands = next;
        tau_prev = Some(tau_value);
        if d_beta <= cfg.psi_beta && d_pos <= cfg.psi_pos && d_tau <= cfg.psi_tau {
            converged = true;
            break;
        }
    }

    let metrics = slot::execute_slot(
        world,
        &cands,
        tau_value,
        infeasible,
        policy.local_compute(),
        cfg,
    );
    let decision = SlotDecision {
        tau: tau_value,
        alphas: world.devices.iter().map(|d| d.type1).collect(),
        betas: cands.iter().map(|c| c.serving).collect(),
        positions: cands.iter().map(|c| c.pos).collect(),
        inner_iters: iters,
        converged,
    };
    (decision, metrics)
}

/// One UAV decision pass: greedy (deterministic) action of the learned
/// policy, or the heuristic baseline.
fn propose_candidates(
    world: &WorldState,
    policy: RunPolicy<'_>,
    observations: &Option<Vec<Vec<f64>>>,
    space: &ActionSpace,
    cfg: &SimConfig,
) -> Vec<UavCandidate> {
    match policy.nets() {
        Some(nets) => {
            let obs = observations.as_ref().expect("observations for net policies");
            (0..world.uavs.len())
                .map(|u| {
                    let action = nets.greedy_action(u, &obs[u], cfg);
                    space.apply(action, world.uavs[u].pos, cfg)
                })
                .collect()
        }
        None => greedy_candidates(world, space, cfg),
    }
}

/// Heuristic baseline: a UAV serves while its battery exceeds its own
/// worst-case serving cost, charges otherwise, and always takes the
/// action that brings it closest to the centroid of the devices nearest
/// to it (the laser sits at the area center, so drained UAVs drift back
/// toward strong charging anyway).
pub fn greedy_candidates(
    world: &WorldState,
    space: &ActionSpace,
    cfg: &SimConfig,
) -> Vec<UavCandidate> {
    let serve_threshold =
        physics::uav_energy(true, cfg.uav_speed_high, cfg) * cfg.slot_duration;
    // Cluster: each device belongs to its nearest UAV.
    let mut sums: Vec<(f64, f64, usize)> = alloc::vec![(0.0, 0.0, 0); world.uavs.len()];
    for d in &world.devices {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, u) in world.uavs.iter().enumerate() {
            let d2 = u.pos.horizontal_dist2(&d.pos);
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        sums[best].0 += d.pos.x;
        sums[best].1 += d.pos.y;
        sums[best].2 += 1;
    }
    world
        .uavs
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let serving = u.residual_energy > serve_threshold;
            let target = if sums[i].2 > 0 {
                Point::new(sums[i].0 / sums[i].2 as f64, sums[i].1 / sums[i].2 as f64)
            } else {
                world.laser_pos
            };
            let mut best: Option<(f64, UavCandidate)> = None;
            for (a, action) in space.actions.iter().enumerate() {
                if action.serving != serving {
                    continue;
                }
                let cand = space.apply(a, u.pos, cfg);
                let dist = cand.pos.horizontal_dist2(&target);
                if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                    best = Some((dist, cand));
                }
            }
            best.expect("action space has entries for both schedules").1
        })
        .collect()
}

/// Runs `cfg.slots_per_episode` slots and aggregates the metrics.
pub fn run_episode<R: Rng + ?Sized>(
    world: &mut WorldState,
    policy: RunPolicy<'_>,
    space: &ActionSpace,
    cfg: &SimConfig,
    rng: &mut R,
) -> (EpisodeMetrics, Vec<SlotMetrics>) {
    let mut slots = Vec::with_capacity(cfg.slots_per_episode);
    let mut decisions = 0usize;
    let mut eff_sum = 0.0;
    let mut bits = 0.0;
    let mut energy = 0.0;
    let mut harvest = 0.0;
    let mut penalties = 0;
    let mut infeasible = 0;
    for _ in 0..cfg.slots_per_episode {
        let (decision, metrics) = run_slot(world, policy, space, cfg, rng);
        eff_sum += metrics.efficiency;
        bits += metrics.total_bits;
        energy += metrics.total_energy();
        harvest += metrics.per_device.iter().map(|d| d.harvested).sum::<f64>();
        penalties += metrics.penalties();
        infeasible += metrics.tau_infeasible as usize;
        decisions += decision.converged as usize;
        slots.push(metrics);
    }
    let l = cfg.slots_per_episode as f64;
    (
        EpisodeMetrics {
            slots: cfg.slots_per_episode,
            mean_efficiency: eff_sum / l,
            total_bits: bits,
            total_energy: energy,
            mean_device_harvest: harvest / (l * world.devices.len() as f64),
            penalties,
            infeasible_slots: infeasible,
            converged_slots: decisions,
        },
        slots,
    )
}

/// Evaluates a policy over fresh seeded episodes, one world per episode.
pub fn evaluate<R: Rng + ?Sized>(
    policy: RunPolicy<'_>,
    episodes: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Vec<EpisodeMetrics> {
    let space = build_action_space(cfg);
    (0..episodes)
        .map(|_| {
            let mut world = init_world(cfg, rng);
            run_episode(&mut world, policy, &space, cfg, rng).0
        })
        .collect()
}
