//! Simulation and optimization core for a multi-UAV wireless-powered
//! mobile-edge-computing network.
//!
//! The crate is `no_std` + `alloc` (std is linked only for tests) and is
//! organized around the per-slot decision pipeline:
//!
//! * [`config`] / [`world`] — parameters, world state, slot bookkeeping
//! * [`mobility`] — Manhattan street-grid random walk for ground devices
//! * [`physics`] — channel, harvesting, computation and energy formulas
//! * [`sched`] — residual-energy threshold scheduling of devices
//! * [`tau`] — closed-form time-allocation solver plus its grid oracle
//! * [`nn`] / [`mtdrl`] — multilayer perceptrons and the multi-task
//!   soft-Q learning machinery for UAV charging/trajectory decisions
//! * [`slot`] / [`mural`] — slot execution, the per-slot alternating
//!   optimizer and the comparison baselines

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod mobility;
pub mod mtdrl;
pub mod mural;
pub mod nn;
pub mod num;
pub mod physics;
pub mod sched;
pub mod slot;
pub mod tau;
pub mod world;

pub use config::SimConfig;
pub use world::WorldState;
