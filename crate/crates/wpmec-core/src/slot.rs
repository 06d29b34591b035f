//! Slot execution: applies one joint decision (UAV moves and schedules,
//! device schedule, time allocation) to the world, with battery-exact
//! energy accounting.
//!
//! Residual energies never go negative. A device whose energy bounds
//! fail at the applied τ first skips offloading and, if local
//! computation alone is still unaffordable, idles for the slot. UAVs are
//! allowed to over-spend (the learning formulation relaxes their energy
//! constraint); the over-spend zeroes the battery and is flagged so the
//! reward penalty and the audit trail see exactly the same event.

use alloc::vec::Vec;

use rand::Rng;

use crate::config::SimConfig;
use crate::mobility::{self, StreetGrid};
use crate::physics;
use crate::sched;
use crate::tau::{self, DevicePlan, SlotPlan, UavPlan};
use crate::world::{DeviceSlot, Point, SlotMetrics, UavSlot, WorldState};

/// Candidate UAV decision for one slot: where it ends up, whether it
/// serves, and the speed implied by the move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavCandidate {
    pub pos: Point,
    pub serving: bool,
    pub speed: f64,
}

/// Advances every device along the street grid with a fresh uniform
/// speed draw, as happens at the start of each slot.
pub fn mobility_step<R: Rng + ?Sized>(world: &mut WorldState, cfg: &SimConfig, rng: &mut R) {
    let grid = StreetGrid::from_config(cfg);
    for d in &mut world.devices {
        let speed = rng.gen_range(0.0..=cfg.device_max_speed);
        let (pos, heading) = mobility::step_device(d.pos, d.heading, speed, &grid, cfg, rng)
            .expect("device positions stay on the street grid");
        d.pos = pos;
        d.heading = heading;
    }
}

/// Applies the residual-energy threshold rule and stores the flags.
pub fn schedule_devices(world: &mut WorldState, force_all_type1: bool, cfg: &SimConfig) {
    if force_all_type1 {
        for d in &mut world.devices {
            d.type1 = true;
        }
    } else {
        sched::schedule_world(world, cfg);
    }
}

/// Assembles the time-allocation problem for the current device state
/// and a candidate UAV configuration.
pub fn build_plan(
    world: &WorldState,
    uavs: &[UavCandidate],
    local_compute: bool,
    cfg: &SimConfig,
) -> SlotPlan {
    let devices = world
        .devices
        .iter()
        .map(|d| {
            let link_gain = best_link(d.pos, uavs, cfg).map(|(_, g)| g);
            DevicePlan {
                type1: d.type1,
                link_gain,
                ap_gain: physics::virtual_ap_gain(d.pos, &world.ap_positions, cfg),
                residual_energy: d.residual_energy,
                params: d.params,
                local_compute,
            }
        })
        .collect();
    let uav_plans = uavs
        .iter()
        .map(|u| UavPlan {
            serving: u.serving,
            speed: u.speed,
        })
        .collect();
    SlotPlan {
        devices,
        uavs: uav_plans,
    }
}

/// Serving candidate with the best channel to `pos`, ties to the lowest
/// index.
pub fn best_link(pos: Point, uavs: &[UavCandidate], cfg: &SimConfig) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, u) in uavs.iter().enumerate() {
        if !u.serving {
            continue;
        }
        let g = physics::channel_gain(u.pos, pos, cfg);
        match best {
            Some((_, bg)) if bg >= g => {}
            _ => best = Some((i, g)),
        }
    }
    best
}

/// Solves the time allocation for a plan, falling back to the minimum
/// constraint-violation point when the interval is empty. Returns the
/// chosen τ and whether the fallback was taken.
pub fn choose_tau(plan: &SlotPlan, cfg: &SimConfig) -> (f64, bool) {
    match tau::solve_plan(plan, cfg) {
        Ok(t) => (t, false),
        Err(_) => (tau::fallback_tau(plan, cfg), true),
    }
}

/// Applies one slot: UAV moves, device offloading/harvesting at the
/// given τ, battery updates, efficiency metrics. Device scheduling flags
/// must already be set on the world.
pub fn execute_slot(
    world: &mut WorldState,
    uavs: &[UavCandidate],
    tau_value: f64,
    tau_infeasible: bool,
    local_compute: bool,
    cfg: &SimConfig,
) -> SlotMetrics {
    debug_assert_eq!(uavs.len(), world.uavs.len());
    let t = cfg.slot_duration;
    let tol = 1e-12;

    // Devices first: bits, spend, harvest against the candidate UAVs.
    let mut per_device = Vec::with_capacity(world.devices.len());
    let mut total_bits = 0.0;
    let mut device_energy = 0.0;
    for d in &mut world.devices {
        let link = best_link(d.pos, uavs, cfg);
        let ap_gain = physics::virtual_ap_gain(d.pos, &world.ap_positions, cfg);
        let harvest_raw = physics::device_harvest(d.type1, ap_gain, tau_value, cfg);
        let local_power = if local_compute {
            physics::local_energy(&d.params, cfg) / t
        } else {
            0.0
        };
        let tx_power = if link.is_some() { d.params.tx_power } else { 0.0 };
        let frac = physics::offload_time_factor(d.type1, tau_value);

        // Affordability cascade: full slot → no offload → idle.
        let first_period_full = if d.type1 {
            (tx_power + local_power) * tau_value * t
        } else {
            local_power * tau_value * t
        };
        let spend_full = local_power * t + tx_power * frac * t;
        let full_ok = first_period_full <= d.residual_energy + tol
            && spend_full <= d.residual_energy + harvest_raw + tol;
        let local_only_ok = local_power * tau_value * t <= d.residual_energy + tol
            && local_power * t <= d.residual_energy + harvest_raw + tol;

        let (offload, local, skipped, idled) = if full_ok {
            (link.is_some(), local_compute, false, false)
        } else if local_only_ok {
            (false, local_compute, link.is_some(), false)
        } else {
            (false, false, link.is_some(), local_compute)
        };

        let energy_local = if local { local_power * t } else { 0.0 };
        let energy_transmit = if offload { tx_power * frac * t } else { 0.0 };
        let bits_local = if local {
            physics::local_bits(&d.params, cfg)
        } else {
            0.0
        };
        let bits_offload = if offload {
            physics::offload_bits(d.type1, tau_value, link.map(|(_, g)| g), &d.params, cfg)
        } else {
            0.0
        };

        let spend = energy_local + energy_transmit;
        let after_spend = d.residual_energy - spend;
        // The whole-slot bound admits spending into the slot's own
        // harvest, so only the post-harvest balance must clear zero.
        debug_assert!(
            after_spend + harvest_raw >= -1e-9,
            "device spent more than residual plus harvest"
        );
        let headroom = (d.battery_cap - after_spend).max(0.0);
        let harvested = harvest_raw.min(headroom);
        d.residual_energy = (after_spend + harvested).clamp(0.0, d.battery_cap);

        total_bits += bits_local + bits_offload;
        device_energy += spend;
        per_device.push(DeviceSlot {
            bits_local,
            bits_offload,
            energy_local,
            energy_transmit,
            harvested,
            served_by: if offload { link.map(|(i, _)| i) } else { None },
            offload_skipped: skipped,
            idled,
        });
    }

    // UAVs: movement, compute, laser harvest, over-spend bookkeeping.
    let mut per_uav = Vec::with_capacity(world.uavs.len());
    let mut uav_energy = 0.0;
    for (u, cand) in world.uavs.iter_mut().zip(uavs.iter()) {
        u.pos = cand.pos;
        u.serving = cand.serving;
        u.speed = cand.speed;
        let energy_flight = physics::flight_energy(cand.speed, cfg);
        let energy_compute = if cand.serving {
            physics::uav_compute_energy(cfg)
        } else {
            0.0
        };
        let use_total = energy_flight + energy_compute;
        let gain = physics::laser_gain(u.pos, world.laser_pos, cfg);
        let harvest_raw = physics::uav_harvest(cand.serving, gain, cfg);
        let residual_before = u.residual_energy;
        let after_spend = residual_before - use_total;
        let headroom = (cfg.uav_battery_cap - after_spend).max(0.0);
        let harvested = harvest_raw.min(headroom);
        let overspend = use_total > residual_before + harvested;
        u.residual_energy = (after_spend + harvested).clamp(0.0, cfg.uav_battery_cap);

        uav_energy += use_total;
        per_uav.push(UavSlot {
            energy_flight,
            energy_compute,
            harvested,
            residual_before,
            residual_after: u.residual_energy,
            overspend,
        });
    }

    let efficiency = physics::slot_efficiency(total_bits, device_energy, uav_energy)
        .expect("UAV flight energy keeps the denominator positive");
    world.slot += 1;

    SlotMetrics {
        total_bits,
        device_energy,
        uav_energy,
        efficiency,
        per_device,
        per_uav,
        tau_infeasible,
        tau: tau_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::init_world;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn setup() -> (SimConfig, WorldState, ChaCha12Rng) {
        let cfg = SimConfig::default().validate().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        let world = init_world(&cfg, &mut rng);
        (cfg, world, rng)
    }

    fn hold_candidates(world: &WorldState, serving: bool) -> Vec<UavCandidate> {
        world
            .uavs
            .iter()
            .map(|u| UavCandidate {
                pos: u.pos,
                serving,
                speed: 10.0,
            })
            .collect()
    }

    #[test]
    fn residuals_stay_in_range_over_many_slots() {
        let (cfg, mut world, mut rng) = setup();
        let mut bits = 0.0;
        for _ in 0..300 {
            mobility_step(&mut world, &cfg, &mut rng);
            schedule_devices(&mut world, false, &cfg);
            let cands = hold_candidates(&world, true);
            let plan = build_plan(&world, &cands, true, &cfg);
            let (tau, infeasible) = choose_tau(&plan, &cfg);
            let m = execute_slot(&mut world, &cands, tau, infeasible, true, &cfg);
            for d in &world.devices {
                assert!(d.residual_energy >= 0.0 && d.residual_energy <= d.battery_cap);
            }
            for u in &world.uavs {
                assert!(u.residual_energy >= 0.0 && u.residual_energy <= cfg.uav_battery_cap);
            }
            assert!(m.efficiency >= 0.0);
            bits += m.total_bits;
        }
        assert!(bits > 0.0, "the run computed nothing at all");
    }

    #[test]
    fn device_accounting_is_exact() {
        let (cfg, mut world, mut rng) = setup();
        for _ in 0..100 {
            mobility_step(&mut world, &cfg, &mut rng);
            schedule_devices(&mut world, false, &cfg);
            let before: Vec<f64> = world.devices.iter().map(|d| d.residual_energy).collect();
            let cands = hold_candidates(&world, true);
            let plan = build_plan(&world, &cands, true, &cfg);
            let (tau, infeasible) = choose_tau(&plan, &cfg);
            let m = execute_slot(&mut world, &cands, tau, infeasible, true, &cfg);
            for ((d, slot), b) in world.devices.iter().zip(&m.per_device).zip(&before) {
                let want =
                    (b - slot.energy_local - slot.energy_transmit + slot.harvested).max(0.0);
                assert!(
                    (d.residual_energy - want.min(d.battery_cap)).abs() < 1e-9,
                    "accounting drift"
                );
            }
        }
    }

    #[test]
    fn uav_overspend_flag_matches_the_energy_inequality() {
        let (cfg, mut world, _rng) = setup();
        // Drain a UAV and force an expensive hover far from the laser.
        world.uavs[0].residual_energy = 1.0;
        world.uavs[0].pos = Point::new(0.0, 0.0);
        schedule_devices(&mut world, false, &cfg);
        let mut cands = hold_candidates(&world, true);
        cands[0].speed = cfg.min_speed_clamp; // ζ2/0.1 = 400 J
        let plan = build_plan(&world, &cands, true, &cfg);
        let (tau, infeasible) = choose_tau(&plan, &cfg);
        let m = execute_slot(&mut world, &cands, tau, infeasible, true, &cfg);
        let u = &m.per_uav[0];
        assert!(u.overspend);
        assert_eq!(u.residual_after, 0.0);
        let use_total = u.energy_flight + u.energy_compute;
        assert!(use_total > u.residual_before + u.harvested);
    }

    #[test]
    fn charging_uav_refills_and_caps_at_battery() {
        let (cfg, mut world, _rng) = setup();
        world.uavs[0].pos = Point::new(500.0, 500.0); // on top of the laser
        world.uavs[0].residual_energy = 10.0;
        schedule_devices(&mut world, false, &cfg);
        let mut cands = hold_candidates(&world, false);
        cands[0].pos = Point::new(500.0, 500.0);
        let plan = build_plan(&world, &cands, true, &cfg);
        let (tau, infeasible) = choose_tau(&plan, &cfg);
        let m = execute_slot(&mut world, &cands, tau, infeasible, true, &cfg);
        let u = &m.per_uav[0];
        assert!(u.harvested > 0.0);
        assert!(u.residual_after <= cfg.uav_battery_cap);
        assert!(u.residual_after > 10.0);
        assert_eq!(u.energy_compute, 0.0);
        assert_eq!(m.per_device[0].bits_offload + m.per_device[1].bits_offload, 0.0);
    }

    #[test]
    fn offloading_only_mode_zeroes_local_terms() {
        let (cfg, mut world, mut rng) = setup();
        mobility_step(&mut world, &cfg, &mut rng);
        schedule_devices(&mut world, false, &cfg);
        let cands = hold_candidates(&world, true);
        let plan = build_plan(&world, &cands, false, &cfg);
        let (tau, infeasible) = choose_tau(&plan, &cfg);
        let m = execute_slot(&mut world, &cands, tau, infeasible, false, &cfg);
        for d in &m.per_device {
            assert_eq!(d.bits_local, 0.0);
            assert_eq!(d.energy_local, 0.0);
        }
        assert!(m.total_bits > 0.0, "offloaded bits still flow");
    }

    #[test]
    fn drained_device_idles_instead_of_going_negative() {
        let (cfg, mut world, _rng) = setup();
        world.devices[0].residual_energy = 0.0;
        // Park it far from every AP so harvest cannot cover local compute.
        world.devices[0].pos = Point::new(0.0, 0.0);
        schedule_devices(&mut world, false, &cfg);
        let cands = hold_candidates(&world, true);
        let plan = build_plan(&world, &cands, true, &cfg);
        let (tau, infeasible) = choose_tau(&plan, &cfg);
        let m = execute_slot(&mut world, &cands, tau, infeasible, true, &cfg);
        let d = &m.per_device[0];
        if d.idled {
            assert_eq!(d.bits_local, 0.0);
            assert_eq!(d.energy_local + d.energy_transmit, 0.0);
        }
        assert!(world.devices[0].residual_energy >= 0.0);
    }

    #[test]
    fn slot_efficiency_matches_the_fractional_objective_when_feasible() {
        let (cfg, mut world, mut rng) = setup();
        let mut checked = 0;
        for _ in 0..50 {
            mobility_step(&mut world, &cfg, &mut rng);
            schedule_devices(&mut world, false, &cfg);
            let cands = hold_candidates(&world, true);
            let plan = build_plan(&world, &cands, true, &cfg);
            let (tau_value, infeasible) = choose_tau(&plan, &cfg);
            let coeffs = tau::coefficients(&plan, &cfg);
            let m = execute_slot(&mut world, &cands, tau_value, infeasible, true, &cfg);
            if infeasible || m.per_device.iter().any(|d| d.offload_skipped || d.idled) {
                continue;
            }
            let predicted = tau::objective(tau_value, &coeffs).unwrap();
            assert!(
                (m.efficiency - predicted).abs() <= 1e-9 * predicted,
                "slot efficiency {} vs objective {predicted}",
                m.efficiency
            );
            checked += 1;
        }
        assert!(checked > 10, "too few feasible slots: {checked}");
    }
}
