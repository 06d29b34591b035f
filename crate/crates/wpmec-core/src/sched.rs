//! Residual-energy threshold scheduling of devices and the post-schedule
//! quantity updates that feed the time-allocation solver.

use alloc::vec::Vec;

use crate::config::SimConfig;
use crate::physics;
use crate::world::{DeviceParams, WorldState};

/// Scheduling threshold Θ_s of a device: its maximum possible energy
/// consumption in one slot, `(k·f³ + P)·T`. A device whose residual
/// energy exceeds this can afford to offload first and charge second for
/// any time allocation.
pub fn threshold(params: &DeviceParams, cfg: &SimConfig) -> f64 {
    (physics::local_energy(params, cfg) / cfg.slot_duration + params.tx_power) * cfg.slot_duration
}

/// Classifies devices: type-1 (offload first) iff residual energy is
/// strictly above the threshold.
pub fn schedule_devices(residuals: &[f64], thresholds: &[f64]) -> Vec<bool> {
    residuals
        .iter()
        .zip(thresholds.iter())
        .map(|(&e, &th)| e > th)
        .collect()
}

/// Applies the threshold rule to a world in place, returning the flags.
pub fn schedule_world(world: &mut WorldState, cfg: &SimConfig) -> Vec<bool> {
    let flags: Vec<bool> = world
        .devices
        .iter()
        .map(|d| d.residual_energy > threshold(&d.params, cfg))
        .collect();
    for (d, &f) in world.devices.iter_mut().zip(flags.iter()) {
        d.type1 = f;
    }
    flags
}

/// Post-schedule per-device quantities at a fixed τ: computed bits,
/// consumed energy and harvested energy, exactly the physics formulas
/// evaluated at the scheduled α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledQuantities {
    pub bits: f64,
    pub energy: f64,
    pub harvest: f64,
}

pub fn scheduled_quantities(
    type1: bool,
    tau: f64,
    link_gain: Option<f64>,
    ap_gain: f64,
    params: &DeviceParams,
    cfg: &SimConfig,
) -> ScheduledQuantities {
    ScheduledQuantities {
        bits: physics::device_bits(type1, tau, link_gain, params, cfg),
        energy: physics::device_energy(type1, tau, link_gain.is_some(), params, cfg),
        harvest: physics::device_harvest(type1, ap_gain, tau, cfg),
    }
}
