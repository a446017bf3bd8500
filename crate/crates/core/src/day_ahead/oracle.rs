//! Exhaustive reference solver for small horizons.
//!
//! Every charge-indicator vector is enumerated. With the indicators fixed
//! the remaining problem is a linear programme over cumulative charge with
//! nested prefix bounds; it is solved by serving each epoch's reserve
//! deadline from the cheapest open epoch that still has headroom.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    soc_upper_bounds, validate_inputs, ChargeLimits, ChargingPlan, PlanError, VehicleDayProfile,
};
use crate::scenario::{PriceSchedule, VehicleId};

pub const MAX_EPOCHS: usize = 12;

const EPS: f64 = 1e-12;

/// Cheapest amounts for a fixed set of charging epochs, or `None` if the
/// set cannot keep the reserve.
pub fn fill_cheapest(
    profile: &VehicleDayProfile,
    prices: &PriceSchedule,
    limits: &ChargeLimits,
    charge: &[bool],
) -> Option<Vec<f64>> {
    let n = profile.consumption.len();
    let upper = soc_upper_bounds(profile, limits);
    let mut consumed = 0.0;
    let mut need = vec![0.0; n];
    let mut ceiling = vec![0.0; n];
    for h in 0..n {
        consumed += profile.consumption[h];
        need[h] = consumed + limits.e_min - profile.e_init;
        ceiling[h] = upper[h + 1] - profile.e_init + consumed;
        if charge[h] {
            // the post-charge level e_init + A[..=h] - D[..h] stays <= e_max
            let before = consumed - profile.consumption[h];
            ceiling[h] = ceiling[h].min(limits.e_max - profile.e_init + before);
        }
    }

    let mut amount = vec![0.0; n];
    let cumulative = |amount: &[f64], k: usize| amount[..=k].iter().sum::<f64>();
    for k in 0..n {
        loop {
            let deficit = need[k] - cumulative(&amount, k);
            if deficit <= EPS {
                break;
            }
            let mut best: Option<(usize, f64)> = None;
            for g in 0..=k {
                if !charge[g] {
                    continue;
                }
                let mut room = limits.u_max - amount[g];
                for m in g..n {
                    room = room.min(ceiling[m] - cumulative(&amount, m));
                }
                if room <= EPS {
                    continue;
                }
                let cheaper = match best {
                    None => true,
                    Some((b, _)) => prices.energy[g] <= prices.energy[b],
                };
                if cheaper {
                    best = Some((g, room));
                }
            }
            let (g, room) = best?;
            amount[g] += deficit.min(room);
        }
    }
    Some(amount)
}

/// Exact optimum by enumeration of all `2^h` charge-indicator vectors.
pub fn solve_by_enumeration(
    profile: &VehicleDayProfile,
    prices: &PriceSchedule,
    limits: &ChargeLimits,
) -> Result<ChargingPlan, PlanError> {
    validate_inputs(profile, prices, limits)?;
    let n = profile.consumption.len();
    if n > MAX_EPOCHS {
        return Err(PlanError::TooLarge {
            epochs: n,
            limit: MAX_EPOCHS,
        });
    }
    if profile.e_init < limits.e_min - crate::ENERGY_TOLERANCE {
        return Err(PlanError::Infeasible {
            vehicle: profile.vehicle,
            epoch: 1,
        });
    }
    let mut best: Option<ChargingPlan> = None;
    for mask in 0u32..(1u32 << n) {
        let charge: Vec<bool> = (0..n).map(|h| mask & (1 << h) != 0).collect();
        let Some(amount) = fill_cheapest(profile, prices, limits, &charge) else {
            continue;
        };
        let plan = ChargingPlan::from_amounts(profile, prices, amount, charge);
        let better = match &best {
            None => true,
            Some(b) => {
                plan.cost < b.cost - 1e-9
                    || (plan.cost <= b.cost + 1e-9 && plan.charge_count() < b.charge_count())
            }
        };
        if better {
            best = Some(plan);
        }
    }
    best.ok_or_else(|| PlanError::Infeasible {
        vehicle: profile.vehicle,
        epoch: super::check_feasible(profile, limits)
            .err()
            .and_then(|e| match e {
                PlanError::Infeasible { epoch, .. } => Some(epoch),
                _ => None,
            })
            .unwrap_or(n.max(1)),
    })
}

/// A random instance whose consumption, initial level and limits all sit on
/// the `limits.soc_step` grid, with prices in pence steps.
pub fn sample_on_grid(
    rng: &mut impl Rng,
    epochs: usize,
    limits: &ChargeLimits,
) -> (VehicleDayProfile, PriceSchedule) {
    let step = limits.soc_step;
    let span = libm::floor((limits.e_max - limits.e_min) / step + 1e-9) as u32;
    let per_epoch = libm::floor(12.0 / step) as u32;
    let profile = VehicleDayProfile {
        vehicle: VehicleId(0),
        e_init: limits.e_min + f64::from(rng.gen_range(0..=span)) * step,
        consumption: (0..epochs)
            .map(|_| f64::from(rng.gen_range(0..=per_epoch)) * step)
            .collect(),
    };
    let prices = PriceSchedule {
        energy: (0..epochs)
            .map(|_| f64::from(rng.gen_range(10u32..=40)) / 100.0)
            .collect(),
        fixed_cost: 0.3,
    };
    (profile, prices)
}
