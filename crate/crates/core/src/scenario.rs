//! Scenario configuration: fleet, chargers, time grid, prices and the knobs
//! of every pipeline stage. Defaults reproduce the reference case study
//! (40 vehicles, 9 rapid chargers, 800 requests, 06:30-22:00 in 30 minute
//! epochs).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{DemandConfig, ExogenousConfig};
use crate::geometry::Point;

/// Tolerance for energy feasibility checks, kWh.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

pub const MINUTES_PER_DAY: f64 = 1440.0;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(VehicleId, "v");
id_type!(ChargerId, "c");
id_type!(RequestId, "r");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("time {time} is outside the operating window [{start}, {end})")]
    OutOfWindow { time: f64, start: f64, end: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid vehicle parameters: {0}")]
    InvalidVehicle(&'static str),
    #[error("charger {0} has a non-positive charging rate")]
    InvalidCharger(ChargerId),
    #[error("charger ids must be 0..n in order, found {found} at position {position}")]
    ChargerIds { position: usize, found: ChargerId },
    #[error("price schedule has {found} entries, expected 1 or {expected}")]
    PriceLength { found: usize, expected: usize },
    #[error("negative energy price at epoch {0}")]
    NegativePrice(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Operating day split into charging decision epochs of equal length.
/// Clock times are minutes after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub day_start: f64,
    pub day_end: f64,
    pub epoch_length: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            day_start: 6.5 * 60.0,
            day_end: 22.0 * 60.0,
            epoch_length: 30.0,
        }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.day_start < self.day_end) {
            return Err(ScenarioError::InvalidGrid("day_start must precede day_end"));
        }
        if !(self.epoch_length > 0.0) {
            return Err(ScenarioError::InvalidGrid("epoch length must be positive"));
        }
        Ok(())
    }

    pub fn epoch_count(&self) -> usize {
        libm::ceil((self.day_end - self.day_start) / self.epoch_length - 1e-9) as usize
    }

    pub fn minutes(&self) -> f64 {
        self.day_end - self.day_start
    }

    /// 1-based epoch containing `t`. Epoch `h` covers
    /// `[day_start + (h-1)Δ, day_start + hΔ)`.
    pub fn epoch_of(&self, t: f64) -> Result<usize, ScenarioError> {
        if !(t >= self.day_start && t < self.day_end) {
            return Err(ScenarioError::OutOfWindow {
                time: t,
                start: self.day_start,
                end: self.day_end,
            });
        }
        let h = libm::floor((t - self.day_start) / self.epoch_length) as usize + 1;
        Ok(h.min(self.epoch_count()))
    }

    /// Like [`TimeGrid::epoch_of`] but clamps times outside the day onto the
    /// first or last epoch.
    pub fn epoch_clamped(&self, t: f64) -> usize {
        if t < self.day_start {
            1
        } else if t >= self.day_end {
            self.epoch_count()
        } else {
            libm::floor((t - self.day_start) / self.epoch_length) as usize + 1
        }
        .clamp(1, self.epoch_count())
    }

    pub fn epoch_start(&self, h: usize) -> f64 {
        self.day_start + (h as f64 - 1.0) * self.epoch_length
    }

    pub fn epoch_end(&self, h: usize) -> f64 {
        (self.day_start + h as f64 * self.epoch_length).min(self.day_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleSpec {
    /// kWh
    pub battery_capacity: f64,
    /// Reserve level, kWh.
    pub e_min: f64,
    /// Highest level a recharge may reach, kWh.
    pub e_max: f64,
    /// kWh per km.
    pub consumption_rate: f64,
    pub seat_capacity: u32,
    /// km/h
    pub speed_kmh: f64,
    /// State of charge at the start of the day, kWh.
    pub e_init: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        let b = 62.0;
        Self {
            battery_capacity: b,
            e_min: 0.2 * b,
            e_max: 0.8 * b,
            consumption_rate: 0.204,
            seat_capacity: 4,
            speed_kmh: 65.0,
            e_init: b,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |m| Err(ScenarioError::InvalidVehicle(m));
        if !(0.0 <= self.e_min && self.e_min < self.e_max && self.e_max <= self.battery_capacity) {
            return err("need 0 <= e_min < e_max <= battery capacity");
        }
        if !(self.e_min <= self.e_init && self.e_init <= self.battery_capacity) {
            return err("need e_min <= e_init <= battery capacity");
        }
        if !(self.consumption_rate > 0.0) {
            return err("consumption rate must be positive");
        }
        if !(self.speed_kmh > 0.0) {
            return err("speed must be positive");
        }
        if self.seat_capacity == 0 {
            return err("seat capacity must be at least one");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargerSpec {
    pub id: ChargerId,
    pub location: Point,
    /// kWh per minute.
    #[serde(default = "default_charging_rate")]
    pub rate: f64,
}

/// A 50 kW rapid charger.
pub const RAPID_CHARGER_RATE: f64 = 50.0 / 60.0;

fn default_charging_rate() -> f64 {
    RAPID_CHARGER_RATE
}

impl ChargerSpec {
    pub fn rapid(id: u32, x: f64, y: f64) -> Self {
        Self {
            id: ChargerId(id),
            location: Point::new(x, y),
            rate: RAPID_CHARGER_RATE,
        }
    }
}

/// Nine rapid chargers spread over six sites.
pub fn default_chargers() -> Vec<ChargerSpec> {
    let sites = [
        (13.0, 11.0),
        (13.0, 11.0),
        (6.0, 5.0),
        (6.0, 5.0),
        (24.0, 15.0),
        (24.0, 15.0),
        (5.0, 16.0),
        (25.0, 4.0),
        (16.0, 3.0),
    ];
    sites
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| ChargerSpec::rapid(i as u32, x, y))
        .collect()
}

/// Time-of-use energy prices per epoch plus a fixed cost per recharge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceSchedule {
    /// Currency per kWh. A single entry applies to every epoch.
    pub energy: Vec<f64>,
    /// Currency per recharge operation.
    pub fixed_cost: f64,
}

impl Default for PriceSchedule {
    fn default() -> Self {
        Self {
            energy: vec![0.25],
            fixed_cost: 0.3,
        }
    }
}

impl PriceSchedule {
    pub fn flat(epochs: usize, price: f64, fixed_cost: f64) -> Self {
        Self {
            energy: vec![price; epochs],
            fixed_cost,
        }
    }

    /// Expands a single broadcast price to `epochs` entries and checks the
    /// schedule.
    pub fn resolve(&self, epochs: usize) -> Result<PriceSchedule, ScenarioError> {
        let energy = match self.energy.len() {
            1 => vec![self.energy[0]; epochs],
            n if n == epochs => self.energy.clone(),
            n => {
                return Err(ScenarioError::PriceLength {
                    found: n,
                    expected: epochs,
                })
            }
        };
        if let Some(h) = energy.iter().position(|&p| !(p >= 0.0)) {
            return Err(ScenarioError::NegativePrice(h + 1));
        }
        if !(self.fixed_cost >= 0.0) {
            return Err(ScenarioError::InvalidParameter("fixed recharge cost must be >= 0"));
        }
        Ok(PriceSchedule {
            energy,
            fixed_cost: self.fixed_cost,
        })
    }

    pub fn epochs(&self) -> usize {
        self.energy.len()
    }
}

/// Charging policy run by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Policy {
    /// Reactive: charge at the nearest charger once the battery runs low.
    #[serde(rename = "NP")]
    NeedBased,
    /// Day-ahead plan plus per-epoch assignment, chargers assumed free.
    #[serde(rename = "OCP0")]
    Planned,
    /// Day-ahead plan plus per-epoch assignment using occupancy forecasts.
    #[serde(rename = "OCP*")]
    Predictive,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::NeedBased, Policy::Planned, Policy::Predictive];

    pub fn label(self) -> &'static str {
        match self {
            Policy::NeedBased => "NP",
            Policy::Planned => "OCP0",
            Policy::Predictive => "OCP*",
        }
    }

    pub fn from_label(s: &str) -> Option<Policy> {
        Policy::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s))
            .or(match s.to_ascii_lowercase().as_str() {
                "need-based" | "np" => Some(Policy::NeedBased),
                "ocp0" | "planned" => Some(Policy::Planned),
                "ocp1" | "ocp-star" | "predictive" => Some(Policy::Predictive),
                _ => None,
            })
    }

    pub fn uses_plan(self) -> bool {
        !matches!(self, Policy::NeedBased)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    AlwaysFree,
    HistoricalProfile,
    PerfectOracle,
    NoisyOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    /// Minutes ahead covered by one forecast.
    pub horizon: f64,
    /// Per-minute flip probability of the noisy oracle.
    pub flip_probability: f64,
    /// Occupancy frequency above which the historical profile predicts busy.
    pub profile_threshold: f64,
    /// Days of synthetic public charging history behind the profile backend.
    pub history_days: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: PredictorKind::NoisyOracle,
            horizon: 60.0,
            flip_probability: 0.18,
            profile_threshold: 0.5,
            history_days: 28,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub fleet_size: usize,
    pub vehicle: VehicleSpec,
    pub chargers: Vec<ChargerSpec>,
    pub depot: Point,
    pub grid: TimeGrid,
    pub prices: PriceSchedule,
    pub policy: Policy,
    pub predictor: PredictorConfig,
    /// Largest amount one vehicle can take in one epoch, kWh.
    pub u_max: f64,
    /// Weight of charging minutes in the assignment objective.
    pub theta1: f64,
    /// Weight of expected waiting minutes in the assignment objective.
    pub theta2: f64,
    /// Big-M linking charge amount to the charge indicator. Defaults to `u_max`.
    pub big_m: Option<f64>,
    /// Energy big-M of the assignment model. Defaults to the battery capacity.
    pub big_m1: Option<f64>,
    /// Time big-M of the assignment model. Defaults to the operating day length.
    pub big_m2: Option<f64>,
    /// SOC grid resolution of the day-ahead solver, kWh.
    pub soc_step: f64,
    /// Need-based policy threshold as a fraction of battery capacity.
    pub need_threshold: f64,
    pub lagrangian_iterations: usize,
    /// Minutes after the desired pickup before an unserved request is dropped.
    pub rejection_deadline: f64,
    /// Need-based training days used to estimate per-epoch consumption.
    pub training_days: usize,
    /// Days since 1970-01-01 of the simulated day (weekday lookups).
    pub calendar_day: i64,
    pub demand: DemandConfig,
    pub exogenous: ExogenousConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let vehicle = VehicleSpec::default();
        Self {
            seed: 1,
            fleet_size: 40,
            vehicle,
            chargers: default_chargers(),
            depot: Point::new(15.0, 10.0),
            grid: TimeGrid::default(),
            prices: PriceSchedule::default(),
            policy: Policy::Predictive,
            predictor: PredictorConfig::default(),
            u_max: 25.0,
            theta1: 0.025,
            theta2: 0.5,
            big_m: None,
            big_m1: None,
            big_m2: None,
            soc_step: 0.1,
            need_threshold: 0.25,
            lagrangian_iterations: 200,
            rejection_deadline: 30.0,
            training_days: 10,
            // Monday 2018-05-14
            calendar_day: 17665,
            demand: DemandConfig::default(),
            exogenous: ExogenousConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn big_m(&self) -> f64 {
        self.big_m.unwrap_or(self.u_max)
    }

    pub fn big_m1(&self) -> f64 {
        self.big_m1.unwrap_or(self.vehicle.battery_capacity)
    }

    pub fn big_m2(&self) -> f64 {
        self.big_m2.unwrap_or(self.grid.minutes())
    }

    pub fn price_schedule(&self) -> Result<PriceSchedule, ScenarioError> {
        self.prices.resolve(self.grid.epoch_count())
    }

    pub fn charge_limits(&self) -> crate::day_ahead::ChargeLimits {
        crate::day_ahead::ChargeLimits {
            e_min: self.vehicle.e_min,
            e_max: self.vehicle.e_max,
            u_max: self.u_max,
            big_m: self.big_m(),
            soc_step: self.soc_step,
        }
    }

    pub fn charger(&self, id: ChargerId) -> Option<&ChargerSpec> {
        self.chargers.get(id.index())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.grid.validate()?;
        self.vehicle.validate()?;
        for (position, c) in self.chargers.iter().enumerate() {
            if c.id.index() != position {
                return Err(ScenarioError::ChargerIds {
                    position,
                    found: c.id,
                });
            }
            if !(c.rate > 0.0) {
                return Err(ScenarioError::InvalidCharger(c.id));
            }
        }
        self.price_schedule()?;
        let p = |m| Err(ScenarioError::InvalidParameter(m));
        if !(self.u_max > 0.0) {
            return p("u_max must be positive");
        }
        if !(self.theta1 >= 0.0 && self.theta2 >= 0.0) {
            return p("theta1 and theta2 must be non-negative");
        }
        if !(self.big_m() >= self.u_max) {
            return p("M must be at least u_max");
        }
        if !(self.big_m1() >= self.vehicle.battery_capacity && self.big_m1() >= self.predictor.horizon)
        {
            return p("M1 must cover the battery capacity and the forecast horizon");
        }
        if !(self.big_m2() >= self.grid.minutes()) {
            return p("M2 must cover the operating day");
        }
        if !(self.soc_step > 0.0) {
            return p("soc_step must be positive");
        }
        if !(self.predictor.horizon > 0.0) {
            return p("forecast horizon must be positive");
        }
        if !(0.0..=1.0).contains(&self.predictor.flip_probability) {
            return p("flip probability must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.need_threshold) {
            return p("need threshold must lie in [0, 1]");
        }
        if !(self.rejection_deadline >= 0.0) {
            return p("rejection deadline must be non-negative");
        }
        self.demand
            .validate(self.vehicle.seat_capacity)
            .map_err(|_| ScenarioError::InvalidParameter("invalid demand settings"))?;
        Ok(())
    }
}
