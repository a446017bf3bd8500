//! Charging management for an electric ride-hailing fleet.
//!
//! The crate is `no_std` and only needs `alloc`. It contains the two
//! optimisation stages (day-ahead charge scheduling and per-epoch
//! vehicle-to-charger assignment), charger occupancy windows and
//! predictors, a seeded demand generator and the discrete-event simulator
//! that runs a full service day under a chosen charging policy.
//!
//! File formats, configuration loading and the command line live in the
//! `evcharge` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod assignment;
pub mod day_ahead;
pub mod demand;
pub mod geometry;
pub mod matrix;
pub mod metrics;
pub mod occupancy;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use geometry::{travel, Point, Travel};
pub use scenario::{
    ChargerId, ChargerSpec, PriceSchedule, RequestId, ScenarioConfig, ScenarioError, TimeGrid,
    VehicleId, VehicleSpec, ENERGY_TOLERANCE,
};
