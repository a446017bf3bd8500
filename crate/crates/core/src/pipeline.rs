//! The full two-stage workflow for one seed: need-based training days give
//! per-epoch consumption estimates, the day-ahead stage turns them into
//! charging plans, and the test day is simulated under each policy on the
//! same demand and outside charging sessions.

use alloc::vec::Vec;

use thiserror::Error;

use crate::day_ahead::{self, ChargingPlan, PlanError, VehicleDayProfile};
use crate::demand::{self, DemandError, ExogenousSession, RideRequest};
use crate::metrics::{self, MetricsReport, ProfileError};
use crate::occupancy::HistoricalProfile;
use crate::rng::{self, streams};
use crate::scenario::{ChargerId, Policy, ScenarioConfig, ScenarioError, VehicleId};
use crate::sim::{self, DayInputs, SimError, SimOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error("training day {day}: {source}")]
    Training { day: usize, source: SimError },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{policy}: {source}")]
    Simulation { policy: Policy, source: SimError },
}

/// Demand and outside sessions of one simulated day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayData {
    pub requests: Vec<RideRequest>,
    pub exogenous: Vec<ExogenousSession>,
}

fn charger_ids(cfg: &ScenarioConfig) -> Vec<ChargerId> {
    cfg.chargers.iter().map(|c| c.id).collect()
}

/// The test day of `cfg.seed`.
pub fn test_day(cfg: &ScenarioConfig) -> Result<DayData, PipelineError> {
    day_data(cfg, cfg.seed)
}

fn day_data(cfg: &ScenarioConfig, seed: u64) -> Result<DayData, PipelineError> {
    Ok(DayData {
        requests: demand::generate(seed, &cfg.demand)?,
        exogenous: demand::generate_exogenous(seed, &cfg.exogenous, &charger_ids(cfg))?,
    })
}

/// Seed of training day `k`; independent of the test day.
pub fn training_seed(seed: u64, k: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(seed, streams::TRAINING), k as u64)
}

/// Runs `cfg.training_days` need-based days and returns their consumption
/// logs, `[day][vehicle][epoch]`.
pub fn training_logs(cfg: &ScenarioConfig) -> Result<Vec<Vec<Vec<f64>>>, PipelineError> {
    let np = ScenarioConfig {
        policy: Policy::NeedBased,
        ..cfg.clone()
    };
    (0..cfg.training_days)
        .map(|k| {
            let day = day_data(cfg, training_seed(cfg.seed, k))?;
            let inputs = DayInputs {
                requests: &day.requests,
                exogenous: &day.exogenous,
                ..DayInputs::default()
            };
            sim::run_day(&np, &inputs)
                .map(|o| o.consumption)
                .map_err(|source| PipelineError::Training { day: k, source })
        })
        .collect()
}

/// Per-vehicle day profiles from averaged consumption logs.
pub fn profiles_from_logs(
    cfg: &ScenarioConfig,
    logs: &[Vec<Vec<f64>>],
) -> Result<Vec<VehicleDayProfile>, PipelineError> {
    let mean = metrics::mean_consumption(logs)?;
    Ok(mean
        .into_iter()
        .enumerate()
        .map(|(i, consumption)| VehicleDayProfile {
            vehicle: VehicleId(i as u32),
            e_init: cfg.vehicle.e_init,
            consumption,
        })
        .collect())
}

pub fn plan(cfg: &ScenarioConfig, profiles: &[VehicleDayProfile]) -> Result<Vec<ChargingPlan>, PipelineError> {
    let prices = cfg.price_schedule()?;
    Ok(day_ahead::solve_fleet(profiles, &prices, &cfg.charge_limits())?)
}

/// Synthetic public charging history of the days before the test day.
pub fn history(cfg: &ScenarioConfig) -> Result<HistoricalProfile, PipelineError> {
    let days: Vec<i64> = (1..=cfg.predictor.history_days as i64)
        .map(|k| cfg.calendar_day - k)
        .collect();
    let records = demand::exogenous_history(
        rng::derive_seed(cfg.seed, streams::HISTORY),
        &cfg.exogenous,
        &charger_ids(cfg),
        &days,
    )?;
    Ok(HistoricalProfile::from_sessions(
        cfg.chargers.len(),
        &records,
        &days,
        cfg.predictor.profile_threshold,
    ))
}

/// Everything one policy run needs besides the day itself.
pub struct Prepared {
    pub plans: Vec<ChargingPlan>,
    pub plan_cost: f64,
    pub history: Option<HistoricalProfile>,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared, PipelineError> {
    cfg.validate()?;
    let logs = training_logs(cfg)?;
    let profiles = profiles_from_logs(cfg, &logs)?;
    let plans = plan(cfg, &profiles)?;
    let history = match cfg.predictor.kind {
        crate::scenario::PredictorKind::HistoricalProfile => Some(history(cfg)?),
        _ => None,
    };
    Ok(Prepared {
        plan_cost: day_ahead::fleet_cost(&plans),
        plans,
        history,
    })
}

pub fn run_policy(
    cfg: &ScenarioConfig,
    policy: Policy,
    day: &DayData,
    prepared: &Prepared,
) -> Result<(SimOutcome, MetricsReport), PipelineError> {
    let cfg = ScenarioConfig {
        policy,
        ..cfg.clone()
    };
    let inputs = DayInputs {
        requests: &day.requests,
        exogenous: &day.exogenous,
        plans: if policy.uses_plan() { &prepared.plans } else { &[] },
        history: prepared.history.as_ref(),
        initial_soc: None,
    };
    let outcome =
        sim::run_day(&cfg, &inputs).map_err(|source| PipelineError::Simulation { policy, source })?;
    let plan_cost = if policy.uses_plan() { prepared.plan_cost } else { 0.0 };
    let report = MetricsReport::from_visits(&outcome.visits, outcome.served, outcome.rejected, plan_cost);
    Ok((outcome, report))
}
