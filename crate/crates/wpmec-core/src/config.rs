//! Simulation configuration: every scalar parameter of the system model
//! plus the training and solver knobs, with documented defaults.
//!
//! A raw config (e.g. parsed from JSON) must pass [`SimConfig::validate`]
//! before use; all other modules assume a validated config.

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

/// How the per-slot reward of a UAV is formed from the efficiency history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Reward is the current slot's computation efficiency.
    Incremental,
    /// Reward is the running sum of efficiencies since the episode start.
    Cumulative,
}

/// All simulation, physics, solver and learning parameters.
///
/// Units are SI throughout: meters, seconds, watts, joules, hertz.
/// Fields absent from a config file take the defaults below; unknown
/// fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Side length of the square service area (m).
    pub area_side: f64,
    /// Number of mobile devices M.
    pub num_devices: usize,
    /// Number of UAVs U.
    pub num_uavs: usize,
    /// Number of energy access points.
    pub num_aps: usize,
    /// Duration of one time slot T (s).
    pub slot_duration: f64,
    /// Channel bandwidth (Hz).
    pub bandwidth: f64,
    /// Receiver noise power (W). Calibrated so that device-to-UAV SNR at
    /// typical ranges keeps offload capacity on the order of the local
    /// computation rate.
    pub noise_power: f64,
    /// Device transmission power (W).
    pub device_tx_power: f64,
    /// Device CPU frequency (Hz).
    pub device_cpu_hz: f64,
    /// UAV CPU frequency (Hz).
    pub uav_cpu_hz: f64,
    /// CPU cycles required per data bit.
    pub cycles_per_bit: f64,
    /// Transmission power of the virtual AP transmitter (W).
    pub ap_tx_power: f64,
    /// Transmission power of the laser emitter (W).
    pub laser_tx_power: f64,
    /// Energy conversion efficiency of devices, in (0,1).
    pub device_harvest_eff: f64,
    /// Energy conversion efficiency of UAVs, in (0,1).
    pub uav_harvest_eff: f64,
    /// UAV flight altitude H (m).
    pub uav_altitude: f64,
    /// Maximum device walking speed (m/s); 5.56 m/s is 20 km/h.
    pub device_max_speed: f64,
    /// Chip energy coefficient of devices (J·s²/cycle³).
    pub chip_coeff_device: f64,
    /// Chip energy coefficient of UAVs (J·s²/cycle³).
    pub chip_coeff_uav: f64,
    /// Cubic flight-power coefficient ζ₁ (W·s³/m³). Together with
    /// `flight_coeff_inverse`, a 10 m/s UAV consumes 5 W.
    pub flight_coeff_cubic: f64,
    /// Inverse flight-power coefficient ζ₂ (W·m/s).
    pub flight_coeff_inverse: f64,
    /// Device-to-UAV channel power gain at 1 m reference distance.
    pub channel_ref_gain: f64,
    /// Reference gain of the AP downlink used for device harvesting.
    /// Calibrated so a device at the mean AP distance harvests on the
    /// order of its per-slot consumption (~0.06 J).
    pub ap_ref_gain: f64,
    /// Telescope (collector) gain of the laser receiver.
    pub laser_telescope_gain: f64,
    /// Optical efficiency of the combined laser transceiver.
    pub laser_optical_eff: f64,
    /// Attenuation coefficient of the laser medium (1/m).
    pub laser_attenuation: f64,
    /// Initial laser beam size (m).
    pub laser_beam_size: f64,
    /// Angular divergence of the laser beam (rad). Focused so that
    /// charging pays off near the emitter but not across the whole
    /// area, which keeps UAV charge scheduling a real decision.
    pub laser_divergence: f64,
    /// Lower clamp on UAV speed when pricing flight energy (m/s); the
    /// fixed-wing flight model diverges at zero speed.
    pub min_speed_clamp: f64,
    /// Half-width ε_τ excluded at both ends of the open interval (0,1)
    /// of the time-allocation variable.
    pub tau_epsilon: f64,
    /// Street block size of the Manhattan mobility grid (m).
    pub street_block: f64,
    /// Probability of continuing straight at an intersection.
    pub turn_prob_straight: f64,
    /// Probability of turning left at an intersection (right gets the
    /// remainder).
    pub turn_prob_left: f64,
    /// Initial device energy as a multiple of the scheduling threshold.
    pub device_init_energy_factor: f64,
    /// Device battery capacity as a multiple of the scheduling threshold.
    pub device_cap_factor: f64,
    /// Initial UAV battery energy (J). Below one episode's worth of
    /// full-time serving, so UAVs must schedule charging.
    pub uav_init_energy: f64,
    /// UAV battery capacity (J).
    pub uav_battery_cap: f64,
    /// Discount factor γ of the Markov decision process, in (0,1).
    pub discount: f64,
    /// Distillation weight λ = c_KL/(c_KL + c_Ent), in [0,1].
    pub distill_weight: f64,
    /// Inverse temperature μ = 1/(c_KL + c_Ent) of the Boltzmann policy.
    pub inv_temperature: f64,
    /// Uniform mixture floor applied to the shared policy wherever it
    /// gates other distributions. Bounds the log-probability shaping
    /// term and keeps every action recoverable, preventing the
    /// distillation loop from collapsing onto a single action.
    pub pi0_floor: f64,
    /// Penalty λ_u added to a UAV's reward on an energy over-spend.
    pub uav_penalty: f64,
    /// Replay batch size B.
    pub batch_size: usize,
    /// Learning rate of the adaptive-moment optimizer.
    pub learning_rate: f64,
    /// Number of training episodes E.
    pub episodes: usize,
    /// Number of slots L per episode.
    pub slots_per_episode: usize,
    /// Per-UAV replay memory capacity (transitions).
    pub replay_capacity: usize,
    /// Width of each hidden layer of the policy networks.
    pub hidden_width: usize,
    /// Number of hidden layers of the policy networks.
    pub hidden_layers: usize,
    /// Training steps between synchronizations of the frozen target nets.
    pub target_sync_interval: usize,
    /// Initial exploration floor mixed into the behavior policy.
    pub explore_start: f64,
    /// Final exploration floor.
    pub explore_end: f64,
    /// Fraction of training over which the exploration floor anneals.
    pub explore_anneal_frac: f64,
    /// Low UAV speed level of the discrete action set (m/s).
    pub uav_speed_low: f64,
    /// High UAV speed level of the discrete action set (m/s).
    pub uav_speed_high: f64,
    /// Include other UAVs' position/energy/schedule in each observation.
    pub joint_obs: bool,
    /// Reward formation mode.
    pub reward_mode: RewardMode,
    /// Inner-loop tolerance ψ₁ on UAV scheduling changes.
    pub psi_beta: f64,
    /// Inner-loop tolerance ψ₂ on UAV position changes (m).
    pub psi_pos: f64,
    /// Inner-loop tolerance ψ₃ on time-allocation changes.
    pub psi_tau: f64,
    /// Cap on inner alternation iterations per slot.
    pub max_inner_iters: usize,
    /// Seed for all pseudo-randomness of a run.
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            area_side: 1000.0,
            num_devices: 10,
            num_uavs: 2,
            num_aps: 4,
            slot_duration: 1.0,
            bandwidth: 1e6,
            noise_power: 1e-12,
            device_tx_power: 0.1,
            device_cpu_hz: 5e8,
            uav_cpu_hz: 2.5e9,
            cycles_per_bit: 50.0,
            ap_tx_power: 60.0,
            laser_tx_power: 200.0,
            device_harvest_eff: 0.5,
            uav_harvest_eff: 0.8,
            uav_altitude: 10.0,
            device_max_speed: 5.56,
            chip_coeff_device: 1e-28,
            chip_coeff_uav: 1e-28,
            flight_coeff_cubic: 1e-3,
            flight_coeff_inverse: 40.0,
            channel_ref_gain: 1e-3,
            ap_ref_gain: 150.0,
            laser_telescope_gain: 1.0,
            laser_optical_eff: 1.0,
            laser_attenuation: 1e-4,
            laser_beam_size: 0.1,
            laser_divergence: 5e-3,
            min_speed_clamp: 0.1,
            tau_epsilon: 1e-4,
            street_block: 100.0,
            turn_prob_straight: 0.5,
            turn_prob_left: 0.25,
            device_init_energy_factor: 5.0,
            device_cap_factor: 10.0,
            uav_init_energy: 150.0,
            uav_battery_cap: 1000.0,
            discount: 0.95,
            distill_weight: 0.5,
            inv_temperature: 1.0,
            pi0_floor: 0.02,
            uav_penalty: 10.0,
            batch_size: 128,
            learning_rate: 0.001,
            episodes: 200,
            slots_per_episode: 50,
            replay_capacity: 20_000,
            hidden_width: 128,
            hidden_layers: 2,
            target_sync_interval: 100,
            explore_start: 0.3,
            explore_end: 0.01,
            explore_anneal_frac: 1.0 / 3.0,
            uav_speed_low: 5.0,
            uav_speed_high: 10.0,
            joint_obs: true,
            reward_mode: RewardMode::Incremental,
            psi_beta: 1e-3,
            psi_pos: 1.0,
            psi_tau: 1e-3,
            max_inner_iters: 10,
            rng_seed: 0,
        }
    }
}

/// Rejection of an invalid configuration, naming the violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl core::error::Error for ConfigError {}

macro_rules! ensure {
    ($cond:expr, $msg:expr) => {
        if !($cond) {
            return Err(ConfigError(String::from($msg)));
        }
    };
}

impl SimConfig {
    /// Checks every invariant and returns the config ready for use.
    ///
    /// The first violated invariant is reported by name.
    pub fn validate(self) -> Result<Self, ConfigError> {
        ensure!(self.num_devices >= 1, "num_devices must be >= 1");
        ensure!(self.num_uavs >= 1, "num_uavs must be >= 1");
        ensure!(self.num_aps >= 1, "num_aps must be >= 1");
        ensure!(
            self.area_side.is_finite() && self.area_side > 0.0,
            "area_side must be positive"
        );
        ensure!(
            self.slot_duration.is_finite() && self.slot_duration > 0.0,
            "slot_duration must be positive"
        );
        for (value, name) in [
            (self.bandwidth, "bandwidth must be positive"),
            (self.noise_power, "noise_power must be positive"),
            (self.device_tx_power, "device_tx_power must be positive"),
            (self.device_cpu_hz, "device_cpu_hz must be positive"),
            (self.uav_cpu_hz, "uav_cpu_hz must be positive"),
            (self.cycles_per_bit, "cycles_per_bit must be positive"),
            (self.ap_tx_power, "ap_tx_power must be positive"),
            (self.laser_tx_power, "laser_tx_power must be positive"),
            (self.uav_altitude, "uav_altitude must be positive"),
            (self.chip_coeff_device, "chip_coeff_device must be positive"),
            (self.chip_coeff_uav, "chip_coeff_uav must be positive"),
            (self.flight_coeff_cubic, "flight_coeff_cubic must be positive"),
            (self.flight_coeff_inverse, "flight_coeff_inverse must be positive"),
            (self.channel_ref_gain, "channel_ref_gain must be positive"),
            (self.ap_ref_gain, "ap_ref_gain must be positive"),
            (self.laser_telescope_gain, "laser_telescope_gain must be positive"),
            (self.laser_optical_eff, "laser_optical_eff must be positive"),
            (self.laser_attenuation, "laser_attenuation must be positive"),
            (self.laser_beam_size, "laser_beam_size must be positive"),
            (self.laser_divergence, "laser_divergence must be positive"),
            (self.min_speed_clamp, "min_speed_clamp must be positive"),
            (self.street_block, "street_block must be positive"),
            (self.uav_init_energy, "uav_init_energy must be positive"),
            (self.uav_battery_cap, "uav_battery_cap must be positive"),
            (self.inv_temperature, "inv_temperature must be positive"),
            (self.learning_rate, "learning_rate must be positive"),
            (self.uav_speed_low, "uav_speed_low must be positive"),
            (self.uav_speed_high, "uav_speed_high must be positive"),
        ] {
            ensure!(value.is_finite() && value > 0.0, name);
        }
        ensure!(
            self.device_max_speed.is_finite() && self.device_max_speed >= 0.0,
            "device_max_speed must be non-negative"
        );
        ensure!(
            self.device_harvest_eff > 0.0 && self.device_harvest_eff < 1.0,
            "device_harvest_eff out of (0,1)"
        );
        ensure!(
            self.uav_harvest_eff > 0.0 && self.uav_harvest_eff < 1.0,
            "uav_harvest_eff out of (0,1)"
        );
        ensure!(
            self.tau_epsilon > 0.0 && self.tau_epsilon < 0.5,
            "tau_epsilon out of (0,0.5)"
        );
        ensure!(
            self.discount > 0.0 && self.discount < 1.0,
            "discount out of (0,1)"
        );
        ensure!(
            (0.0..=1.0).contains(&self.distill_weight),
            "distill_weight out of [0,1]"
        );
        ensure!(
            (0.0..1.0).contains(&self.pi0_floor),
            "pi0_floor out of [0,1)"
        );
        ensure!(self.uav_penalty >= 0.0, "uav_penalty must be non-negative");
        ensure!(
            self.turn_prob_straight >= 0.0
                && self.turn_prob_left >= 0.0
                && self.turn_prob_straight + self.turn_prob_left <= 1.0,
            "turn probabilities must be non-negative and sum to at most 1"
        );
        let blocks = self.area_side / self.street_block;
        ensure!(
            blocks >= 1.0 - 1e-9 && (blocks - libm::round(blocks)).abs() < 1e-9,
            "area_side must be a positive multiple of street_block"
        );
        ensure!(
            self.device_init_energy_factor > 0.0,
            "device_init_energy_factor must be positive"
        );
        ensure!(
            self.device_cap_factor >= self.device_init_energy_factor,
            "device_cap_factor must be >= device_init_energy_factor"
        );
        ensure!(
            self.uav_battery_cap >= self.uav_init_energy,
            "uav_battery_cap must be >= uav_init_energy"
        );
        ensure!(self.batch_size >= 1, "batch_size must be >= 1");
        ensure!(self.replay_capacity >= self.batch_size, "replay_capacity must be >= batch_size");
        ensure!(self.hidden_width >= 1, "hidden_width must be >= 1");
        ensure!(self.hidden_layers >= 1, "hidden_layers must be >= 1");
        ensure!(self.target_sync_interval >= 1, "target_sync_interval must be >= 1");
        ensure!(self.slots_per_episode >= 1, "slots_per_episode must be >= 1");
        ensure!(
            (0.0..=1.0).contains(&self.explore_start)
                && (0.0..=1.0).contains(&self.explore_end)
                && self.explore_end <= self.explore_start,
            "exploration floor must satisfy 0 <= explore_end <= explore_start <= 1"
        );
        ensure!(
            self.explore_anneal_frac > 0.0 && self.explore_anneal_frac <= 1.0,
            "explore_anneal_frac out of (0,1]"
        );
        ensure!(
            self.uav_speed_low <= self.uav_speed_high,
            "uav_speed_low must be <= uav_speed_high"
        );
        ensure!(self.psi_beta >= 0.0, "psi_beta must be non-negative");
        ensure!(self.psi_pos >= 0.0, "psi_pos must be non-negative");
        ensure!(self.psi_tau >= 0.0, "psi_tau must be non-negative");
        ensure!(self.max_inner_iters >= 1, "max_inner_iters must be >= 1");
        Ok(self)
    }

    /// Altitude-squared term of the device-UAV channel denominator.
    pub fn altitude_sq(&self) -> f64 {
        self.uav_altitude * self.uav_altitude
    }

    /// Number of street-grid intersections per side.
    pub fn grid_nodes_per_side(&self) -> usize {
        (libm::round(self.area_side / self.street_block) as usize) + 1
    }
}
