//! Discrete-event simulation of one service day.
//!
//! Requests arrive over the day and are inserted into vehicle routes.
//! Chargers serve fleet vehicles and outside EVs first-come first-served.
//! At every epoch boundary the planned policies send the vehicles due to
//! charge through the assignment model; the need-based policy instead sends
//! any idle vehicle below a SOC threshold to its nearest charger.

pub mod dispatch;
mod engine;
pub mod event;
pub mod policy;
pub mod trace;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::AssignmentError;
use crate::day_ahead::ChargingPlan;
use crate::demand::{ExogenousSession, RideRequest};
use crate::occupancy::{ChargingSessionRecord, HistoricalProfile};
use crate::scenario::{ChargerId, Policy, ScenarioConfig, ScenarioError, VehicleId};

pub use event::Occupant;
pub use trace::{TraceKind, TraceRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("expected one plan per vehicle ({expected}), got {found}")]
    PlanCount { expected: usize, found: usize },
    #[error("plan {index} is for {vehicle} or has {found} epochs, expected {expected}")]
    PlanShape {
        index: usize,
        vehicle: VehicleId,
        expected: usize,
        found: usize,
    },
    #[error("initial SOC list must hold one level in [0, capacity] per vehicle")]
    InitialSoc,
    #[error("requests must be sorted by arrival time")]
    UnsortedDemand,
    #[error("the historical-profile forecast needs charging history")]
    MissingHistory,
    #[error("{vehicle} ran its battery below zero ({soc:.4} kWh) at t={time:.2}")]
    NegativeSoc {
        vehicle: VehicleId,
        time: f64,
        soc: f64,
    },
    #[error("assignment failed: {0}")]
    Assignment(AssignmentError),
}

/// Everything a day run consumes besides the scenario settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct DayInputs<'a> {
    pub requests: &'a [RideRequest],
    pub exogenous: &'a [ExogenousSession],
    /// One plan per vehicle, in vehicle order. Ignored by the need-based
    /// policy.
    pub plans: &'a [ChargingPlan],
    /// Needed by the historical-profile forecast only.
    pub history: Option<&'a HistoricalProfile>,
    /// Per-vehicle SOC at the start of the day; defaults to the vehicle
    /// setting.
    pub initial_soc: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleStatus {
    Available,
    Serving,
    GoCharging,
    WaitingAtCharger,
    Charging,
}

/// One completed charge of a fleet vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeVisitRecord {
    pub vehicle: VehicleId,
    pub charger: ChargerId,
    /// When the vehicle set off for the charger.
    pub departed: f64,
    pub arrival: f64,
    pub start: f64,
    pub end: f64,
    /// Driving minutes to the charger.
    pub access: f64,
    pub wait: f64,
    pub charge_minutes: f64,
    pub energy: f64,
    pub soc_on_arrival: f64,
    pub soc_after: f64,
    pub target: f64,
    /// Waiting expected by the assignment model, when it made the decision.
    pub predicted_wait: Option<f64>,
    pub emergency: bool,
}

/// Plug-in interval of any occupant, as realised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionLogEntry {
    pub charger: ChargerId,
    pub occupant: Occupant,
    pub arrival: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SoftViolationKind {
    /// A leg ended below the reserve level.
    BelowReserve,
    /// No charger was reachable above the reserve; sent to the nearest one.
    EmergencyCharge,
    /// The assignment had no feasible solution; the whole list waited.
    NoFeasibleAssignment,
    /// Postponed past the last epoch; the charge was dropped.
    DroppedAtDayEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftViolation {
    pub time: f64,
    pub vehicle: Option<VehicleId>,
    pub kind: SoftViolationKind,
    pub soc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub vehicle: VehicleId,
    pub soc_initial: f64,
    pub soc_final: f64,
    pub odometer_km: f64,
    pub energy_charged: f64,
    pub requests_served: usize,
}

/// What happened at one epoch boundary of a planned policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub listed: usize,
    pub skipped: usize,
    pub postponed: usize,
    pub emergency: usize,
    pub assigned: usize,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub policy: Policy,
    pub visits: Vec<ChargeVisitRecord>,
    pub sessions: Vec<SessionLogEntry>,
    pub trace: Vec<TraceRow>,
    /// kWh driven per vehicle per epoch.
    pub consumption: Vec<Vec<f64>>,
    pub vehicles: Vec<VehicleSummary>,
    pub served: usize,
    pub rejected: usize,
    pub soft_violations: Vec<SoftViolation>,
    pub epochs: Vec<EpochLog>,
}

impl SimOutcome {
    pub fn trace_hash(&self) -> u64 {
        trace::trace_hash(&self.trace)
    }

    /// Realised charger occupancy as session records.
    pub fn session_records(&self) -> Vec<ChargingSessionRecord> {
        self.sessions
            .iter()
            .filter(|s| s.end > s.start)
            .map(|s| ChargingSessionRecord {
                charger: s.charger,
                start: s.start,
                end: s.end,
                energy_kwh: None,
            })
            .collect()
    }
}

/// Runs one day under `cfg.policy` until every event is processed, every
/// route is finished, and every vehicle is back at the depot.
pub fn run_day(cfg: &ScenarioConfig, inputs: &DayInputs) -> Result<SimOutcome, SimError> {
    engine::Sim::new(cfg, inputs)?.run()
}
