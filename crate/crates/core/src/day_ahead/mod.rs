//! Day-ahead charge scheduling.
//!
//! Each vehicle gets a plan saying in which epochs it charges and how much,
//! minimising energy cost plus a fixed cost per recharge while keeping its
//! state of charge between the reserve and the allowed maximum. Vehicles do
//! not share any constraint at this stage, so the fleet problem is solved
//! one vehicle at a time.

mod check;
mod dp;
pub mod oracle;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{PriceSchedule, VehicleId, ENERGY_TOLERANCE};

pub use check::{check_plan, PlanViolation, PlanViolationKind};
pub use dp::solve_vehicle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeLimits {
    pub e_min: f64,
    pub e_max: f64,
    /// Largest charge in one epoch, kWh.
    pub u_max: f64,
    /// Big-M of the charge indicator link.
    pub big_m: f64,
    /// SOC grid resolution of the dynamic programme, kWh.
    pub soc_step: f64,
}

impl ChargeLimits {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(0.0 <= self.e_min && self.e_min < self.e_max) {
            return Err(PlanError::InvalidLimits("need 0 <= e_min < e_max"));
        }
        if !(self.u_max > 0.0) {
            return Err(PlanError::InvalidLimits("u_max must be positive"));
        }
        if !(self.big_m >= self.u_max) {
            return Err(PlanError::InvalidLimits("M must be at least u_max"));
        }
        if !(self.soc_step > 0.0) {
            return Err(PlanError::InvalidLimits("SOC step must be positive"));
        }
        Ok(())
    }
}

/// Expected consumption of one vehicle over the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleDayProfile {
    pub vehicle: VehicleId,
    pub e_init: f64,
    /// kWh consumed in each epoch.
    pub consumption: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingPlan {
    pub vehicle: VehicleId,
    /// Whether the vehicle charges in each epoch.
    pub charge: Vec<bool>,
    /// kWh charged in each epoch.
    pub amount: Vec<f64>,
    /// SOC at the start of each epoch plus the end-of-day level.
    pub soc: Vec<f64>,
    pub cost: f64,
}

impl ChargingPlan {
    pub fn epochs(&self) -> usize {
        self.charge.len()
    }

    pub fn charge_count(&self) -> usize {
        self.charge.iter().filter(|&&y| y).count()
    }

    /// Planned post-charge level for 1-based epoch `h`, if the vehicle
    /// charges then.
    pub fn target(&self, h: usize) -> Option<f64> {
        let i = h.checked_sub(1)?;
        match self.charge.get(i) {
            Some(true) => Some(self.soc[i] + self.amount[i]),
            _ => None,
        }
    }

    pub(crate) fn from_amounts(
        profile: &VehicleDayProfile,
        prices: &PriceSchedule,
        amount: Vec<f64>,
        charge: Vec<bool>,
    ) -> Self {
        let mut soc = Vec::with_capacity(amount.len() + 1);
        soc.push(profile.e_init);
        let mut cost = 0.0;
        for (h, (&u, &d)) in amount.iter().zip(&profile.consumption).enumerate() {
            let e = soc[h];
            soc.push(e + u - d);
            cost += prices.energy[h] * u;
            if charge[h] {
                cost += prices.fixed_cost;
            }
        }
        Self {
            vehicle: profile.vehicle,
            charge,
            amount,
            soc,
            cost,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("vehicle {vehicle}: no feasible schedule, reserve cannot be kept in epoch {epoch}")]
    Infeasible { vehicle: VehicleId, epoch: usize },
    #[error("vehicle {vehicle}: {found} consumption entries but {expected} priced epochs")]
    Shape {
        vehicle: VehicleId,
        expected: usize,
        found: usize,
    },
    #[error("vehicle {vehicle}: negative consumption in epoch {epoch}")]
    NegativeConsumption { vehicle: VehicleId, epoch: usize },
    #[error("enumeration supports at most {limit} epochs, got {epochs}")]
    TooLarge { epochs: usize, limit: usize },
    #[error("invalid charge limits: {0}")]
    InvalidLimits(&'static str),
}

/// Upper SOC bound at the start of each epoch and at day end.
///
/// The bound is `e_max`, except that a vehicle starting the day above
/// `e_max` may stay above it for as long as it has not charged.
pub fn soc_upper_bounds(profile: &VehicleDayProfile, limits: &ChargeLimits) -> Vec<f64> {
    let mut bounds = Vec::with_capacity(profile.consumption.len() + 1);
    let mut uncharged = profile.e_init;
    bounds.push(limits.e_max.max(uncharged));
    for &d in &profile.consumption {
        uncharged -= d;
        bounds.push(limits.e_max.max(uncharged));
    }
    bounds
}

fn validate_inputs(
    profile: &VehicleDayProfile,
    prices: &PriceSchedule,
    limits: &ChargeLimits,
) -> Result<(), PlanError> {
    limits.validate()?;
    if profile.consumption.len() != prices.epochs() {
        return Err(PlanError::Shape {
            vehicle: profile.vehicle,
            expected: prices.epochs(),
            found: profile.consumption.len(),
        });
    }
    if let Some(h) = profile.consumption.iter().position(|&d| !(d >= 0.0)) {
        return Err(PlanError::NegativeConsumption {
            vehicle: profile.vehicle,
            epoch: h + 1,
        });
    }
    Ok(())
}

/// Checks that some schedule exists by charging as much as allowed in every
/// epoch; the reachable SOC range is an interval so its maximum decides.
pub fn check_feasible(profile: &VehicleDayProfile, limits: &ChargeLimits) -> Result<(), PlanError> {
    let infeasible = |epoch| PlanError::Infeasible {
        vehicle: profile.vehicle,
        epoch,
    };
    if profile.e_init < limits.e_min - ENERGY_TOLERANCE {
        return Err(infeasible(1));
    }
    let upper = soc_upper_bounds(profile, limits);
    let mut reach = profile.e_init;
    for (h, &d) in profile.consumption.iter().enumerate() {
        let post = reach
            .max((reach + limits.u_max).min(limits.e_max))
            .min(upper[h + 1] + d);
        if post + ENERGY_TOLERANCE < d + limits.e_min {
            return Err(infeasible(h + 1));
        }
        reach = post - d;
    }
    Ok(())
}

/// Solves every vehicle independently. Costs add up across vehicles.
pub fn solve_fleet(
    profiles: &[VehicleDayProfile],
    prices: &PriceSchedule,
    limits: &ChargeLimits,
) -> Result<Vec<ChargingPlan>, PlanError> {
    profiles
        .iter()
        .map(|p| solve_vehicle(p, prices, limits))
        .collect()
}

pub fn fleet_cost(plans: &[ChargingPlan]) -> f64 {
    plans.iter().map(|p| p.cost).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn limits(e_min: f64, e_max: f64, u_max: f64) -> ChargeLimits {
        ChargeLimits {
            e_min,
            e_max,
            u_max,
            big_m: u_max,
            soc_step: 0.1,
        }
    }

    #[test]
    fn upper_bounds_relax_above_e_max() {
        let p = VehicleDayProfile {
            vehicle: VehicleId(0),
            e_init: 62.0,
            consumption: vec![5.0, 10.0, 10.0],
        };
        let ub = soc_upper_bounds(&p, &limits(12.4, 49.6, 25.0));
        assert_eq!(ub, vec![62.0, 57.0, 49.6, 49.6]);
    }

    #[test]
    fn feasibility_precheck_reports_first_epoch() {
        let l = limits(10.0, 40.0, 10.0);
        let p = VehicleDayProfile {
            vehicle: VehicleId(3),
            e_init: 20.0,
            consumption: vec![l.u_max + l.e_max, 0.0],
        };
        assert_eq!(
            check_feasible(&p, &l),
            Err(PlanError::Infeasible {
                vehicle: VehicleId(3),
                epoch: 1
            })
        );
    }

    #[test]
    fn plan_target_is_post_charge_level() {
        let p = VehicleDayProfile {
            vehicle: VehicleId(0),
            e_init: 20.0,
            consumption: vec![2.0, 2.0],
        };
        let prices = PriceSchedule::flat(2, 0.25, 0.3);
        let plan = ChargingPlan::from_amounts(&p, &prices, vec![0.0, 3.0], vec![false, true]);
        assert_eq!(plan.target(1), None);
        assert_eq!(plan.target(2), Some(21.0));
        assert_eq!(plan.target(3), None);
        assert_eq!(plan.soc, vec![20.0, 18.0, 19.0]);
    }
}
