//! World state: per-slot positions, residual energies and scheduling
//! flags of all devices and UAVs, plus per-slot metric bookkeeping.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::mobility::Heading;
use crate::sched;

/// A point in the ground plane. UAVs fly at the configured altitude
/// above their ground-plane position; devices have z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn horizontal_dist2(&self, other: &Point) -> f64 {
        crate::num::dist2(self.x, self.y, other.x, other.y)
    }
}

/// Per-device physical parameters; identical across devices by default
/// but kept per-device so heterogeneous populations stay expressible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Transmission power (W).
    pub tx_power: f64,
    /// CPU frequency (Hz).
    pub cpu_hz: f64,
    /// Chip energy coefficient (J·s²/cycle³).
    pub chip_coeff: f64,
}

impl DeviceParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            tx_power: cfg.device_tx_power,
            cpu_hz: cfg.device_cpu_hz,
            chip_coeff: cfg.chip_coeff_device,
        }
    }
}

/// One mobile device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub pos: Point,
    pub heading: Heading,
    /// Residual battery energy (J), never negative.
    pub residual_energy: f64,
    /// Battery capacity (J); harvesting clamps here.
    pub battery_cap: f64,
    /// Scheduling flag α: true = type-1 (offloads first, harvests second).
    pub type1: bool,
    pub params: DeviceParams,
}

/// One UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub pos: Point,
    /// Residual battery energy (J), never negative.
    pub residual_energy: f64,
    /// Scheduling flag β: true = type-1 (serves computation all slot).
    pub serving: bool,
    /// Speed flown during the last applied slot (m/s).
    pub speed: f64,
}

/// Complete state of the network at the end of a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Index of the next slot to simulate.
    pub slot: usize,
    pub devices: Vec<DeviceState>,
    pub uavs: Vec<UavState>,
    pub ap_positions: Vec<Point>,
    pub laser_pos: Point,
}

/// Energy ledger of one device over one slot (all entries ≥ 0, joules).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceSlot {
    pub bits_local: f64,
    pub bits_offload: f64,
    pub energy_local: f64,
    pub energy_transmit: f64,
    /// Harvest actually credited after the battery-cap clamp.
    pub harvested: f64,
    /// Serving UAV the device offloaded to, if any.
    pub served_by: Option<usize>,
    /// The device's own energy constraint would have been violated, so
    /// offloading was skipped this slot.
    pub offload_skipped: bool,
    /// Even local computation was unaffordable; the device idled.
    pub idled: bool,
}

/// Energy ledger of one UAV over one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UavSlot {
    pub energy_flight: f64,
    pub energy_compute: f64,
    /// Harvest actually credited after the battery-cap clamp.
    pub harvested: f64,
    pub residual_before: f64,
    pub residual_after: f64,
    /// Energy use exceeded residual plus harvest; penalty charged.
    pub overspend: bool,
}

/// Aggregated outcome of one simulated slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    /// Total computed bits across devices (local + offloaded).
    pub total_bits: f64,
    /// Total device energy consumption (J).
    pub device_energy: f64,
    /// Total UAV energy consumption (J).
    pub uav_energy: f64,
    /// Computation efficiency η = bits / (device + UAV energy).
    pub efficiency: f64,
    pub per_device: Vec<DeviceSlot>,
    pub per_uav: Vec<UavSlot>,
    /// The time-allocation interval was empty; a fallback τ was applied.
    pub tau_infeasible: bool,
    /// Applied time-allocation variable.
    pub tau: f64,
}

impl SlotMetrics {
    pub fn total_energy(&self) -> f64 {
        self.device_energy + self.uav_energy
    }

    pub fn penalties(&self) -> usize {
        self.per_uav.iter().filter(|u| u.overspend).count()
    }
}

/// Builds the initial world: the laser at the area center, APs on a
/// uniform grid, devices at random street intersections at full initial
/// charge, and UAVs uniformly at altitude. Deterministic given the RNG.
pub fn init_world<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> WorldState {
    let laser_pos = Point::new(cfg.area_side / 2.0, cfg.area_side / 2.0);
    let ap_positions = ap_grid(cfg.num_aps, cfg.area_side);

    let nodes = cfg.grid_nodes_per_side();
    let params = DeviceParams::from_config(cfg);
    let threshold = sched::threshold(&params, cfg);
    let devices = (0..cfg.num_devices)
        .map(|_| {
            let i = rng.gen_range(0..nodes);
            let j = rng.gen_range(0..nodes);
            let heading = Heading::ALL[rng.gen_range(0..4)];
            DeviceState {
                pos: Point::new(i as f64 * cfg.street_block, j as f64 * cfg.street_block),
                heading,
                residual_energy: cfg.device_init_energy_factor * threshold,
                battery_cap: cfg.device_cap_factor * threshold,
                type1: false,
                params,
            }
        })
        .collect();

    let uavs = (0..cfg.num_uavs)
        .map(|_| UavState {
            pos: Point::new(
                rng.gen_range(0.0..=cfg.area_side),
                rng.gen_range(0.0..=cfg.area_side),
            ),
            residual_energy: cfg.uav_init_energy,
            serving: true,
            speed: cfg.uav_speed_high,
        })
        .collect();

    WorldState {
        slot: 0,
        devices,
        uavs,
        ap_positions,
        laser_pos,
    }
}

/// Near-square uniform grid of `n` AP positions over the area: cell
/// centers of a `cols × rows` partition, x-major.
fn ap_grid(n: usize, side: f64) -> Vec<Point> {
    let cols = libm::ceil(libm::sqrt(n as f64)) as usize;
    let rows = n.div_ceil(cols);
    let mut positions = Vec::with_capacity(n);
    'outer: for i in 0..cols {
        for j in 0..rows {
            if positions.len() == n {
                break 'outer;
            }
            positions.push(Point::new(
                (i as f64 + 0.5) * side / cols as f64,
                (j as f64 + 0.5) * side / rows as f64,
            ));
        }
    }
    positions
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn same_seed_yields_identical_serialized_state() {
        let cfg = SimConfig::default().validate().unwrap();
        let a = init_world(&cfg, &mut ChaCha12Rng::seed_from_u64(42));
        let b = init_world(&cfg, &mut ChaCha12Rng::seed_from_u64(42));
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn four_aps_form_the_quarter_grid() {
        let got = ap_grid(4, 1000.0);
        let want = [
            Point::new(250.0, 250.0),
            Point::new(250.0, 750.0),
            Point::new(750.0, 250.0),
            Point::new(750.0, 750.0),
        ];
        assert_eq!(got.len(), 4);
        for (g, w) in got.iter().zip(want.iter()) {
            assert_eq!((g.x, g.y), (w.x, w.y));
        }
    }

    #[test]
    fn laser_sits_at_the_area_center() {
        let cfg = SimConfig::default().validate().unwrap();
        let w = init_world(&cfg, &mut ChaCha12Rng::seed_from_u64(7));
        assert_eq!((w.laser_pos.x, w.laser_pos.y), (500.0, 500.0));
    }

    #[test]
    fn initial_state_is_in_bounds_and_charged() {
        let cfg = SimConfig::default().validate().unwrap();
        let w = init_world(&cfg, &mut ChaCha12Rng::seed_from_u64(9));
        assert_eq!(w.devices.len(), cfg.num_devices);
        assert_eq!(w.uavs.len(), cfg.num_uavs);
        for d in &w.devices {
            assert!(d.pos.x >= 0.0 && d.pos.x <= cfg.area_side);
            assert!(d.pos.y >= 0.0 && d.pos.y <= cfg.area_side);
            assert!(d.residual_energy > 0.0);
            assert!(d.residual_energy <= d.battery_cap);
        }
        for u in &w.uavs {
            assert!(u.pos.x >= 0.0 && u.pos.x <= cfg.area_side);
            assert!(u.residual_energy == cfg.uav_init_energy);
        }
    }

    #[test]
    fn ap_grid_handles_non_square_counts() {
        for n in 1..=9 {
            let grid = ap_grid(n, 1000.0);
            assert_eq!(grid.len(), n);
            for p in &grid {
                assert!(p.x > 0.0 && p.x < 1000.0);
                assert!(p.y > 0.0 && p.y < 1000.0);
            }
        }
    }
}
