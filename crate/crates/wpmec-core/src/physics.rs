//! Channel, harvesting, computation and energy formulas.
//!
//! Everything here is a pure function of positions, scheduling flags, the
//! time-allocation variable τ and the config. Battery-cap clamping and
//! residual-energy bookkeeping live in [`crate::slot`]; these functions
//! return raw physical quantities.

use core::fmt;

use crate::config::SimConfig;
use crate::num;
use crate::world::{DeviceParams, Point, UavState};

/// Line-of-sight channel power gain between a UAV and a ground device:
/// `ξ0 / (H² + d²)` with `d` the horizontal distance.
pub fn channel_gain(uav: Point, device: Point, cfg: &SimConfig) -> f64 {
    cfg.channel_ref_gain / (cfg.altitude_sq() + uav.horizontal_dist2(&device))
}

/// Downlink gain from the integrated virtual AP transmitter to a device:
/// the sum over APs of `ξ_ap / (d0² + d²)` with a 1 m regularizer.
pub fn virtual_ap_gain(device: Point, aps: &[Point], cfg: &SimConfig) -> f64 {
    aps.iter()
        .map(|ap| cfg.ap_ref_gain / (1.0 + device.horizontal_dist2(ap)))
        .sum()
}

/// Laser charging channel gain `Gϑ·e^{−φd} / (F + νd)²` with `d` the
/// Euclidean distance from the emitter to the UAV at altitude.
pub fn laser_gain(uav: Point, laser: Point, cfg: &SimConfig) -> f64 {
    let d = num::sqrt(uav.horizontal_dist2(&laser) + cfg.altitude_sq());
    let denom = cfg.laser_beam_size + cfg.laser_divergence * d;
    cfg.laser_telescope_gain * cfg.laser_optical_eff * num::exp(-cfg.laser_attenuation * d)
        / (denom * denom)
}

/// Time fraction of the slot a device spends transmitting:
/// `1 − τ − α + 2ατ`, which is τ for type-1 and 1−τ for type-2 devices.
#[inline]
pub fn offload_time_factor(type1: bool, tau: f64) -> f64 {
    if type1 {
        tau
    } else {
        1.0 - tau
    }
}

/// Energy a device harvests from the virtual AP transmitter in one slot
/// (type-1 harvests in the second period, type-2 in the first).
pub fn device_harvest(type1: bool, ap_gain: f64, tau: f64, cfg: &SimConfig) -> f64 {
    let period = if type1 { 1.0 - tau } else { tau };
    cfg.device_harvest_eff * ap_gain * cfg.ap_tx_power * period * cfg.slot_duration
}

/// Local computation bits of a device over a full slot: `f·T/C1`.
pub fn local_bits(params: &DeviceParams, cfg: &SimConfig) -> f64 {
    params.cpu_hz * cfg.slot_duration / cfg.cycles_per_bit
}

/// Local computation energy of a device over a full slot: `k·f³·T`.
pub fn local_energy(params: &DeviceParams, cfg: &SimConfig) -> f64 {
    params.chip_coeff * num::powi(params.cpu_hz, 3) * cfg.slot_duration
}

/// Shannon rate of the device→UAV link (bits/s) for a given link gain.
pub fn link_rate(link_gain: f64, params: &DeviceParams, cfg: &SimConfig) -> f64 {
    cfg.bandwidth * num::log2(1.0 + params.tx_power * link_gain / cfg.noise_power)
}

/// Offloaded bits in one slot, zero when no serving UAV is assigned.
pub fn offload_bits(
    type1: bool,
    tau: f64,
    link_gain: Option<f64>,
    params: &DeviceParams,
    cfg: &SimConfig,
) -> f64 {
    match link_gain {
        Some(g) => {
            offload_time_factor(type1, tau) * link_rate(g, params, cfg) * cfg.slot_duration
        }
        None => 0.0,
    }
}

/// Transmission energy in one slot, zero when no serving UAV is assigned
/// (a device without a server does not transmit).
pub fn transmit_energy(
    type1: bool,
    tau: f64,
    assigned: bool,
    params: &DeviceParams,
    cfg: &SimConfig,
) -> f64 {
    if assigned {
        offload_time_factor(type1, tau) * cfg.slot_duration * params.tx_power
    } else {
        0.0
    }
}

/// Total computed bits of a device in one slot (local + offloaded).
pub fn device_bits(
    type1: bool,
    tau: f64,
    link_gain: Option<f64>,
    params: &DeviceParams,
    cfg: &SimConfig,
) -> f64 {
    local_bits(params, cfg) + offload_bits(type1, tau, link_gain, params, cfg)
}

/// Total consumed energy of a device in one slot (local + transmission).
pub fn device_energy(
    type1: bool,
    tau: f64,
    assigned: bool,
    params: &DeviceParams,
    cfg: &SimConfig,
) -> f64 {
    local_energy(params, cfg) + transmit_energy(type1, tau, assigned, params, cfg)
}

/// Energy a UAV harvests from the laser in one slot; serving (type-1)
/// UAVs never charge.
pub fn uav_harvest(serving: bool, laser_gain: f64, cfg: &SimConfig) -> f64 {
    if serving {
        0.0
    } else {
        cfg.uav_harvest_eff * laser_gain * cfg.laser_tx_power * cfg.slot_duration
    }
}

/// Flight energy of a UAV in one slot: `T·(ζ₁v³ + ζ₂/v)` with the speed
/// clamped below to keep the fixed-wing model finite.
pub fn flight_energy(speed: f64, cfg: &SimConfig) -> f64 {
    let v = speed.max(cfg.min_speed_clamp);
    cfg.slot_duration * (cfg.flight_coeff_cubic * num::powi(v, 3) + cfg.flight_coeff_inverse / v)
}

/// Computation energy of a serving UAV in one slot: `k_u·f_u³·T`.
pub fn uav_compute_energy(cfg: &SimConfig) -> f64 {
    cfg.chip_coeff_uav * num::powi(cfg.uav_cpu_hz, 3) * cfg.slot_duration
}

/// Total energy consumption of a UAV in one slot (flight, plus compute
/// when serving).
pub fn uav_energy(serving: bool, speed: f64, cfg: &SimConfig) -> f64 {
    flight_energy(speed, cfg) + if serving { uav_compute_energy(cfg) } else { 0.0 }
}

/// Total energy consumption was zero, so efficiency is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroEnergyError;

impl fmt::Display for ZeroEnergyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slot efficiency undefined: total energy is zero")
    }
}

impl core::error::Error for ZeroEnergyError {}

/// Computation efficiency of a slot: total bits over total energy.
pub fn slot_efficiency(
    total_bits: f64,
    device_energy: f64,
    uav_energy: f64,
) -> Result<f64, ZeroEnergyError> {
    let total = device_energy + uav_energy;
    if total <= 0.0 {
        Err(ZeroEnergyError)
    } else {
        Ok(total_bits / total)
    }
}

/// Index of the serving (type-1) UAV with the best channel to `device`;
/// ties break toward the lowest index. `None` when no UAV serves.
pub fn assign_best_uav(device: Point, uavs: &[UavState], cfg: &SimConfig) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, uav) in uavs.iter().enumerate() {
        if !uav.serving {
            continue;
        }
        let g = channel_gain(uav.pos, device, cfg);
        match best {
            Some((_, bg)) if bg >= g => {}
            _ => best = Some((i, g)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn cfg() -> SimConfig {
        SimConfig::default().validate().unwrap()
    }

    #[test]
    fn channel_gain_overhead_and_offset() {
        let cfg = cfg();
        let uav = Point::new(100.0, 100.0);
        // Zero horizontal offset: ξ0/H² = 1e-3/100.
        assert!((channel_gain(uav, Point::new(100.0, 100.0), &cfg) - 1e-5).abs() < 1e-18);
        // Horizontal distance 10: 1e-3/200.
        assert!((channel_gain(uav, Point::new(110.0, 100.0), &cfg) - 5e-6).abs() < 1e-18);
    }

    #[test]
    fn channel_gain_decreases_with_distance() {
        let cfg = cfg();
        let uav = Point::new(0.0, 0.0);
        let mut last = f64::INFINITY;
        for d in [0.0, 1.0, 5.0, 20.0, 100.0, 500.0, 1400.0] {
            let g = channel_gain(uav, Point::new(d, 0.0), &cfg);
            assert!(g < last);
            assert!(g > 0.0);
            last = g;
        }
    }

    #[test]
    fn virtual_ap_gain_is_additive() {
        let cfg = cfg();
        let device = Point::new(10.0, 20.0);
        let one = virtual_ap_gain(device, &[Point::new(400.0, 600.0)], &cfg);
        let two = virtual_ap_gain(
            device,
            &[Point::new(400.0, 600.0), Point::new(400.0, 600.0)],
            &cfg,
        );
        assert!((two - 2.0 * one).abs() < 1e-15);
        // Colocated AP: gain is ξ_ap over the 1 m² regularizer.
        let colocated = virtual_ap_gain(device, &[device], &cfg);
        assert!((colocated - cfg.ap_ref_gain).abs() < 1e-12);
    }

    #[test]
    fn virtual_ap_gain_matches_hand_sum_for_quarter_grid() {
        let cfg = cfg();
        let aps = [
            Point::new(250.0, 250.0),
            Point::new(250.0, 750.0),
            Point::new(750.0, 250.0),
            Point::new(750.0, 750.0),
        ];
        let device = Point::new(500.0, 500.0);
        // Each AP sits at squared distance 250² + 250² = 125000.
        let want = 4.0 * cfg.ap_ref_gain / (1.0 + 125_000.0);
        assert!((virtual_ap_gain(device, &aps, &cfg) - want).abs() < 1e-12);
    }

    #[test]
    fn laser_gain_at_zero_and_1000m() {
        let mut cfg = cfg();
        cfg.uav_altitude = 10.0;
        cfg.laser_divergence = 1e-3;
        // Evaluate the formula directly at exact distances.
        let at = |d: f64| {
            let denom = cfg.laser_beam_size + cfg.laser_divergence * d;
            num::exp(-cfg.laser_attenuation * d) / (denom * denom)
        };
        assert!((at(0.0) - 100.0).abs() < 1e-9);
        let want_1000 = num::exp(-0.1) / (1.1 * 1.1);
        assert!((at(1000.0) - want_1000).abs() < 1e-12);
        assert!((want_1000 - 0.7477995190379831).abs() < 1e-12);
        // And through the position-based entry point.
        let g = laser_gain(Point::new(500.0, 500.0), Point::new(500.0, 500.0), &cfg);
        assert!((g - at(10.0)).abs() < 1e-12);
    }

    #[test]
    fn laser_gain_decreases_with_distance() {
        let cfg = cfg();
        let laser = Point::new(500.0, 500.0);
        let mut last = f64::INFINITY;
        for d in [0.0, 50.0, 200.0, 500.0, 707.0] {
            let g = laser_gain(Point::new(500.0 + d, 500.0), laser, &cfg);
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn device_harvest_periods() {
        let cfg = cfg();
        let h = 4e-3;
        // Type-2 harvests in the first period: ε·ĥ·P0·τ·T.
        let tau = 0.3;
        let want = 0.5 * h * 60.0 * tau;
        assert!((device_harvest(false, h, tau, &cfg) - want).abs() < 1e-15);
        // Type-1 with τ → 1 harvests almost nothing.
        assert!(device_harvest(true, h, 1.0 - 1e-4, &cfg) < 1e-4);
        // At τ = 0.5 both types harvest the same.
        let a = device_harvest(false, h, 0.5, &cfg);
        let b = device_harvest(true, h, 0.5, &cfg);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn device_harvest_swap_symmetry() {
        // Swapping α and replacing τ with 1−τ leaves the harvest unchanged.
        let cfg = cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let h = rng.gen_range(1e-6..1e-2);
            let tau = rng.gen_range(0.0001..0.9999);
            let a = device_harvest(true, h, tau, &cfg);
            let b = device_harvest(false, h, 1.0 - tau, &cfg);
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn local_bits_and_energy_table_values() {
        let cfg = cfg();
        let p = DeviceParams::from_config(&cfg);
        assert!((local_bits(&p, &cfg) - 1e7).abs() < 1e-6);
        assert!((local_energy(&p, &cfg) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn offload_bits_frozen_value() {
        // α=1, τ=0.5, h=1e-5, B=1e6, Pm=0.1, δ²=1e-9 → 0.5·1e6·log2(1001).
        let mut cfg = cfg();
        cfg.noise_power = 1e-9;
        let p = DeviceParams::from_config(&cfg);
        let got = offload_bits(true, 0.5, Some(1e-5), &p, &cfg);
        let want = 0.5 * 1e6 * num::log2(1001.0);
        assert!((got - want).abs() < 1e-6);
        assert!((got - 4.983613129417996e6).abs() < 1.0);
        // No serving UAV: zero offload, local bits unaffected.
        assert_eq!(offload_bits(true, 0.5, None, &p, &cfg), 0.0);
        assert!((device_bits(true, 0.5, None, &p, &cfg) - 1e7).abs() < 1e-6);
    }

    #[test]
    fn transmit_energy_cases() {
        let cfg = cfg();
        let p = DeviceParams::from_config(&cfg);
        // α=1, τ→1: transmit term approaches T·Pm.
        let e = transmit_energy(true, 1.0 - 1e-12, true, &p, &cfg);
        assert!((e - 0.1).abs() < 1e-9);
        // α=0, τ=0.3: factor 0.7.
        let e = transmit_energy(false, 0.3, true, &p, &cfg);
        assert!((e - 0.07).abs() < 1e-15);
        // Unassigned devices do not transmit.
        assert_eq!(transmit_energy(false, 0.3, false, &p, &cfg), 0.0);
    }

    #[test]
    fn offload_bits_and_transmit_energy_share_the_time_factor() {
        let cfg = cfg();
        let p = DeviceParams::from_config(&cfg);
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..200 {
            let type1 = rng.gen_bool(0.5);
            let tau = rng.gen_range(0.0001..0.9999);
            let g = rng.gen_range(1e-9..1e-4);
            let bits = offload_bits(type1, tau, Some(g), &p, &cfg);
            let energy = transmit_energy(type1, tau, true, &p, &cfg);
            let rate = link_rate(g, &p, &cfg);
            // bits / (rate·T) == energy / (Pm·T) == the shared time factor.
            let f1 = bits / (rate * cfg.slot_duration);
            let f2 = energy / (p.tx_power * cfg.slot_duration);
            assert!((f1 - f2).abs() < 1e-12);
        }
    }

    #[test]
    fn uav_harvest_cases() {
        let cfg = cfg();
        assert_eq!(uav_harvest(true, 0.7479, &cfg), 0.0);
        let h = uav_harvest(false, 0.7479, &cfg);
        assert!((h - 0.8 * 0.7479 * 200.0).abs() < 1e-9);
        let mut doubled = cfg.clone();
        doubled.laser_tx_power *= 2.0;
        assert!((uav_harvest(false, 0.7479, &doubled) - 2.0 * h).abs() < 1e-9);
    }

    #[test]
    fn uav_energy_cases() {
        let cfg = cfg();
        // v = 10 with the calibrated defaults burns 5 J per slot.
        assert!((flight_energy(10.0, &cfg) - 5.0).abs() < 1e-12);
        // Serving adds k_u·f_u³·T = 1.5625 J.
        assert!((uav_compute_energy(&cfg) - 1.5625).abs() < 1e-12);
        assert!((uav_energy(true, 10.0, &cfg) - 6.5625).abs() < 1e-12);
        assert!((uav_energy(false, 10.0, &cfg) - 5.0).abs() < 1e-12);
        // Zero speed is priced at the clamp, not infinity.
        let hover = uav_energy(false, 0.0, &cfg);
        assert!(hover.is_finite());
        assert!((hover - flight_energy(cfg.min_speed_clamp, &cfg)).abs() < 1e-12);
    }

    #[test]
    fn slot_efficiency_ratio_and_errors() {
        assert_eq!(slot_efficiency(1e7, 6.0, 4.0).unwrap(), 1e6);
        assert!(slot_efficiency(1.0, 0.0, 0.0).is_err());
        // Linear in the numerator.
        let base = slot_efficiency(3e6, 2.0, 1.0).unwrap();
        let double = slot_efficiency(6e6, 2.0, 1.0).unwrap();
        assert!((double - 2.0 * base).abs() < 1e-9);
    }

    #[test]
    fn single_device_single_uav_slot_matches_hand_computation() {
        let cfg = cfg();
        let p = DeviceParams::from_config(&cfg);
        let uav = Point::new(300.0, 300.0);
        let dev = Point::new(400.0, 300.0);
        let g = channel_gain(uav, dev, &cfg);
        let tau = 0.4;
        let bits = device_bits(false, tau, Some(g), &p, &cfg);
        let de = device_energy(false, tau, true, &p, &cfg);
        let ue = uav_energy(true, 10.0, &cfg);
        let eta = slot_efficiency(bits, de, ue).unwrap();
        // Independent hand recomputation.
        let snr = 0.1 * (1e-3 / (100.0 + 10_000.0)) / cfg.noise_power;
        let hand_bits = 1e7 + 0.6 * 1e6 * num::log2(1.0 + snr);
        let hand_energy = 0.0125 + 0.6 * 0.1 + 5.0 + 1.5625;
        assert!((eta - hand_bits / hand_energy).abs() < 1e-6);
    }

    #[test]
    fn best_uav_assignment() {
        let cfg = cfg();
        let mk = |x: f64, serving: bool| UavState {
            pos: Point::new(x, 0.0),
            residual_energy: 100.0,
            serving,
            speed: 5.0,
        };
        let dev = Point::new(0.0, 0.0);
        // Single serving UAV wins regardless of distance.
        assert_eq!(assign_best_uav(dev, &[mk(900.0, true)], &cfg), Some(0));
        // Overhead UAV beats a distant one.
        assert_eq!(
            assign_best_uav(dev, &[mk(500.0, true), mk(0.0, true)], &cfg),
            Some(1)
        );
        // Equidistant pair: lowest index.
        assert_eq!(
            assign_best_uav(dev, &[mk(100.0, true), mk(-100.0, true)], &cfg),
            Some(0)
        );
        // No serving UAV at all.
        assert_eq!(assign_best_uav(dev, &[mk(10.0, false)], &cfg), None);
    }

    #[test]
    fn quantities_are_nonnegative_and_finite_on_random_inputs() {
        let cfg = cfg();
        let p = DeviceParams::from_config(&cfg);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..500 {
            let type1 = rng.gen_bool(0.5);
            let tau = rng.gen_range(1e-4..1.0 - 1e-4);
            let g = rng.gen_range(1e-10..1e-3);
            let ap = rng.gen_range(1e-6..1.0);
            let speed = rng.gen_range(0.0..20.0);
            for v in [
                device_harvest(type1, ap, tau, &cfg),
                device_bits(type1, tau, Some(g), &p, &cfg),
                device_energy(type1, tau, true, &p, &cfg),
                uav_harvest(type1, g, &cfg),
                uav_energy(type1, speed, &cfg),
            ] {
                assert!(v.is_finite() && v >= 0.0, "bad quantity {v}");
            }
        }
    }
}
