//! Closed-form solution of the per-slot time-allocation problem, plus an
//! exhaustive grid oracle used by the verification suites.
//!
//! With device scheduling fixed, the slot efficiency is a linear
//! fractional function of the time-allocation variable τ: numerator
//! `Aτ + B` (bits rate) over denominator `Cτ + D` (power). Its
//! derivative `(AD − BC)/(Cτ + D)²` never changes sign, so the optimum
//! sits at an endpoint of the feasible interval; which endpoint is
//! decided by the sign of `AD − BC`.

use alloc::vec::Vec;
use core::fmt;

use crate::config::SimConfig;
use crate::num;
use crate::physics;
use crate::world::DeviceParams;

/// Per-device inputs of the time-allocation problem for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DevicePlan {
    /// Scheduled type: true = type-1 (offloads in the first period).
    pub type1: bool,
    /// Channel gain to the assigned serving UAV, absent when no UAV
    /// serves this slot (the device then neither transmits nor offloads).
    pub link_gain: Option<f64>,
    /// Downlink gain from the virtual AP transmitter.
    pub ap_gain: f64,
    /// Residual battery energy at the end of the previous slot (J).
    pub residual_energy: f64,
    pub params: DeviceParams,
    /// Local computation enabled (disabled by the offloading-only
    /// baseline).
    pub local_compute: bool,
}

/// Per-UAV inputs of the time-allocation problem for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavPlan {
    pub serving: bool,
    pub speed: f64,
}

/// One complete instance of the per-slot problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlan {
    pub devices: Vec<DevicePlan>,
    pub uavs: Vec<UavPlan>,
}

impl DevicePlan {
    /// Offload rate to the assigned UAV (bits/s), zero when unassigned.
    fn rate(&self, cfg: &SimConfig) -> f64 {
        match self.link_gain {
            Some(g) => physics::link_rate(g, &self.params, cfg),
            None => 0.0,
        }
    }

    /// Transmit power actually drawn, zero when unassigned.
    fn tx_power(&self) -> f64 {
        if self.link_gain.is_some() {
            self.params.tx_power
        } else {
            0.0
        }
    }

    /// Local computation rate (bits/s), zero for offloading-only runs.
    fn local_rate(&self, cfg: &SimConfig) -> f64 {
        if self.local_compute {
            physics::local_bits(&self.params, cfg) / cfg.slot_duration
        } else {
            0.0
        }
    }

    /// Local computation power draw (W).
    fn local_power(&self, cfg: &SimConfig) -> f64 {
        if self.local_compute {
            physics::local_energy(&self.params, cfg) / cfg.slot_duration
        } else {
            0.0
        }
    }

    /// Harvest power scale ε·ĥ·P0 (W).
    fn harvest_power(&self, cfg: &SimConfig) -> f64 {
        cfg.device_harvest_eff * self.ap_gain * cfg.ap_tx_power
    }

    fn sign(&self) -> f64 {
        if self.type1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Coefficients of the linear fractional objective `(Aτ+B)/(Cτ+D)`.
///
/// `bits_slope`/`bits_base` are the numerator A and B (bits/s);
/// `power_slope`/`power_base` are the denominator C and D (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalCoefficients {
    pub bits_slope: f64,
    pub bits_base: f64,
    pub power_slope: f64,
    pub power_base: f64,
}

impl FractionalCoefficients {
    /// Sign of the objective's derivative: `AD − BC`.
    pub fn discriminant(&self) -> f64 {
        self.bits_slope * self.power_base - self.bits_base * self.power_slope
    }
}

/// Feasible range of τ after intersecting every device's energy bounds
/// with the open interval `(0,1)` realized as `[ε_τ, 1−ε_τ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TauInterval {
    pub fn feasible(&self) -> bool {
        self.lo <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauError {
    /// The intersection of all device energy bounds is empty.
    Infeasible,
    /// The power denominator is not positive at the requested τ.
    NonPositiveDenominator,
}

impl fmt::Display for TauError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauError::Infeasible => write!(f, "time-allocation interval is empty"),
            TauError::NonPositiveDenominator => {
                write!(f, "fractional objective denominator is not positive")
            }
        }
    }
}

impl core::error::Error for TauError {}

/// Assembles the fractional coefficients from a slot plan.
///
/// A device without an assigned serving UAV contributes neither capacity
/// nor transmit power (it cannot offload), which keeps the objective
/// identical to the assembled slot's bits/energy ratio.
pub fn coefficients(plan: &SlotPlan, cfg: &SimConfig) -> FractionalCoefficients {
    let mut bits_slope = 0.0;
    let mut bits_base = 0.0;
    let mut power_slope = 0.0;
    let mut power_base = 0.0;
    for d in &plan.devices {
        let rate = d.rate(cfg);
        let tx = d.tx_power();
        let s = d.sign();
        let type2 = if d.type1 { 0.0 } else { 1.0 };
        bits_slope += s * rate;
        bits_base += d.local_rate(cfg) + type2 * rate;
        power_slope += s * tx;
        power_base += d.local_power(cfg) + type2 * tx;
    }
    for u in &plan.uavs {
        power_base += physics::uav_energy(u.serving, u.speed, cfg) / cfg.slot_duration;
    }
    FractionalCoefficients {
        bits_slope,
        bits_base,
        power_slope,
        power_base,
    }
}

/// Evaluates the fractional objective `(Aτ+B)/(Cτ+D)` (bits/J).
pub fn objective(tau: f64, coeffs: &FractionalCoefficients) -> Result<f64, TauError> {
    let denom = coeffs.power_slope * tau + coeffs.power_base;
    if denom <= 0.0 {
        return Err(TauError::NonPositiveDenominator);
    }
    Ok((coeffs.bits_slope * tau + coeffs.bits_base) / denom)
}

/// Derives the feasible τ interval from the raw per-device energy
/// inequalities.
///
/// The first-period bound caps τ from above for every device. The
/// whole-slot bound `spend(τ) ≤ residual + harvest(τ)` is linear in τ
/// with slope `T(2α−1)(P + εĥP0)`; the inequality direction therefore
/// flips with the device type: an upper bound for type-1 devices and a
/// lower bound for type-2 devices.
pub fn feasible_interval(plan: &SlotPlan, cfg: &SimConfig) -> TauInterval {
    let t = cfg.slot_duration;
    let mut lo = cfg.tau_epsilon;
    let mut hi = 1.0 - cfg.tau_epsilon;
    for d in &plan.devices {
        let tx = d.tx_power();
        let local_power = d.local_power(cfg);
        let harvest = d.harvest_power(cfg);

        // First-period consumption: (α·P + local)·τ·T ≤ residual.
        let first_period_power = if d.type1 { tx + local_power } else { local_power };
        if first_period_power > 0.0 {
            hi = hi.min(d.residual_energy / (t * first_period_power));
        }

        // Whole-slot bound, sign-correct form of the linear inequality.
        let slope = t * d.sign() * (tx + harvest);
        let offset = local_power * t + if d.type1 { 0.0 } else { tx * t }
            - d.residual_energy
            - if d.type1 { harvest * t } else { 0.0 };
        if slope > 0.0 {
            hi = hi.min(-offset / slope);
        } else if slope < 0.0 {
            lo = lo.max(-offset / slope);
        } else if offset > 0.0 {
            // Constant infeasible constraint: force emptiness.
            return TauInterval { lo: 1.0, hi: 0.0 };
        }
    }
    TauInterval { lo, hi }
}

/// Closed-form optimum of the fractional objective over the interval.
///
/// The derivative sign `AD − BC` picks the endpoint; when the capacity
/// imbalance A is negligible relative to B the objective is flat in τ
/// and the midpoint is returned.
pub fn solve_tau(
    coeffs: &FractionalCoefficients,
    interval: &TauInterval,
) -> Result<f64, TauError> {
    if !interval.feasible() {
        return Err(TauError::Infeasible);
    }
    if num::abs(coeffs.bits_slope) <= 1e-12 * num::abs(coeffs.bits_base) {
        return Ok(interval.midpoint());
    }
    let disc = coeffs.discriminant();
    if disc > 0.0 {
        Ok(interval.hi)
    } else if disc < 0.0 {
        Ok(interval.lo)
    } else {
        Ok(interval.midpoint())
    }
}

/// Convenience wrapper: coefficients, interval and endpoint in one call.
pub fn solve_plan(plan: &SlotPlan, cfg: &SimConfig) -> Result<f64, TauError> {
    let coeffs = coefficients(plan, cfg);
    let interval = feasible_interval(plan, cfg);
    solve_tau(&coeffs, &interval)
}

/// Exhaustive grid oracle: scans τ over `[ε_τ, 1−ε_τ]` with the given
/// step, keeps the feasible argmax of the raw bits/energy ratio.
///
/// This path recomputes bits, energies and the raw energy inequalities
/// from the physics formulas at every grid point; it never touches the
/// closed-form coefficients or interval logic it is used to check.
pub fn oracle_tau(plan: &SlotPlan, cfg: &SimConfig, step: f64) -> Result<f64, TauError> {
    let t = cfg.slot_duration;
    // Hoisted per-device constants (plain formula evaluations).
    let per_device: Vec<(f64, f64, f64, f64, f64, f64)> = plan
        .devices
        .iter()
        .map(|d| {
            (
                d.local_rate(cfg) * t,    // local bits
                d.local_power(cfg) * t,   // local energy
                d.rate(cfg) * t,          // full-period offload bits
                d.tx_power() * t,         // full-period transmit energy
                d.harvest_power(cfg) * t, // full-period harvest
                d.residual_energy,
            )
        })
        .collect();
    let uav_energy: f64 = plan
        .uavs
        .iter()
        .map(|u| physics::uav_energy(u.serving, u.speed, cfg))
        .sum();

    let lo = cfg.tau_epsilon;
    let hi = 1.0 - cfg.tau_epsilon;
    let points = libm::floor((hi - lo) / step) as usize + 1;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=points {
        let tau = (lo + i as f64 * step).min(hi);
        let mut bits = 0.0;
        let mut energy = uav_energy;
        let mut ok = true;
        for (plan_dev, &(lb, le, ob, te, hv, residual)) in
            plan.devices.iter().zip(per_device.iter())
        {
            let offload_frac = physics::offload_time_factor(plan_dev.type1, tau);
            let harvest_frac = 1.0 - offload_frac;
            let spend = le + te * offload_frac;
            let harvested = hv * harvest_frac;
            let first_period = if plan_dev.type1 {
                (le + te) * tau
            } else {
                le * tau
            };
            if first_period > residual + 1e-12 || spend > residual + harvested + 1e-12 {
                ok = false;
                break;
            }
            bits += lb + ob * offload_frac;
            energy += spend;
        }
        if !ok {
            continue;
        }
        let eta = bits / energy;
        if best.map_or(true, |(_, b)| eta > b) {
            best = Some((tau, eta));
        }
        if tau >= hi {
            break;
        }
    }
    best.map(|(tau, _)| tau).ok_or(TauError::Infeasible)
}

/// Fallback for an empty interval: the τ on a coarse grid minimizing the
/// total energy-constraint violation in joules. The slot is marked
/// infeasible by the caller and offending devices skip offloading.
pub fn fallback_tau(plan: &SlotPlan, cfg: &SimConfig) -> f64 {
    let t = cfg.slot_duration;
    let lo = cfg.tau_epsilon;
    let hi = 1.0 - cfg.tau_epsilon;
    let steps = 100;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let tau = lo + (hi - lo) * i as f64 / steps as f64;
        let mut violation = 0.0;
        for d in &plan.devices {
            let tx = d.tx_power() * t;
            let le = d.local_power(cfg) * t;
            let hv = d.harvest_power(cfg) * t;
            let offload_frac = physics::offload_time_factor(d.type1, tau);
            let first_period = if d.type1 { (le + tx) * tau } else { le * tau };
            let spend = le + tx * offload_frac;
            let harvested = hv * (1.0 - offload_frac);
            violation += (first_period - d.residual_energy).max(0.0);
            violation += (spend - d.residual_energy - harvested).max(0.0);
        }
        if violation < best.1 {
            best = (tau, violation);
        }
    }
    best.0
}

/// Synthetic instance generation for the verification suites.
pub mod synth {
    use super::*;
    use crate::world::Point;
    use rand::Rng;

    /// Draws one instance with positions uniform over the area, device
    /// energies uniform over the battery range (so the threshold rule
    /// decides the type mix), UAV schedules Bernoulli and speeds from
    /// the discrete action levels.
    pub fn random_plan<R: Rng + ?Sized>(
        rng: &mut R,
        num_devices: usize,
        num_uavs: usize,
        cfg: &SimConfig,
    ) -> SlotPlan {
        let ap_positions: Vec<Point> = (0..cfg.num_aps)
            .map(|_| {
                Point::new(
                    rng.gen_range(0.0..cfg.area_side),
                    rng.gen_range(0.0..cfg.area_side),
                )
            })
            .collect();
        let uav_positions: Vec<Point> = (0..num_uavs)
            .map(|_| {
                Point::new(
                    rng.gen_range(0.0..cfg.area_side),
                    rng.gen_range(0.0..cfg.area_side),
                )
            })
            .collect();
        let uavs: Vec<UavPlan> = (0..num_uavs)
            .map(|_| {
                let speed = match rng.gen_range(0..10) {
                    0 => cfg.min_speed_clamp,
                    1..=5 => cfg.uav_speed_high,
                    _ => cfg.uav_speed_low,
                };
                UavPlan {
                    serving: rng.gen_bool(0.7),
                    speed,
                }
            })
            .collect();

        let params = DeviceParams::from_config(cfg);
        let threshold = crate::sched::threshold(&params, cfg);
        let devices = (0..num_devices)
            .map(|_| {
                let pos = Point::new(
                    rng.gen_range(0.0..cfg.area_side),
                    rng.gen_range(0.0..cfg.area_side),
                );
                let residual = rng.gen_range(0.0..cfg.device_cap_factor * threshold);
                let link_gain = uavs
                    .iter()
                    .enumerate()
                    .filter(|(_, u)| u.serving)
                    .map(|(i, _)| physics::channel_gain(uav_positions[i], pos, cfg))
                    .fold(None, |acc: Option<f64>, g| {
                        Some(acc.map_or(g, |a| if g > a { g } else { a }))
                    });
                DevicePlan {
                    type1: residual > threshold,
                    link_gain,
                    ap_gain: physics::virtual_ap_gain(pos, &ap_positions, cfg),
                    residual_energy: residual,
                    params,
                    local_compute: true,
                }
            })
            .collect();
        SlotPlan { devices, uavs }
    }

    /// Draws until the closed-form interval is feasible with at least
    /// `margin` width, so the grid oracle always has points to scan.
    pub fn random_feasible_plan<R: Rng + ?Sized>(
        rng: &mut R,
        cfg: &SimConfig,
        margin: f64,
    ) -> SlotPlan {
        loop {
            let m = rng.gen_range(2..=40);
            let u = rng.gen_range(1..=8);
            let plan = random_plan(rng, m, u, cfg);
            let interval = feasible_interval(&plan, cfg);
            if interval.feasible() && interval.hi - interval.lo >= margin {
                return plan;
            }
        }
    }
}
