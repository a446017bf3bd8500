//! Backward dynamic programme over (epoch, SOC grid point).
//!
//! SOC is tracked on a grid of `soc_step` above `e_min`. Consumption is
//! rounded up and charges are whole grid steps, so the true trajectory sits
//! above the grid trajectory by an offset that does not depend on the
//! decisions. The upper bound is tightened by that offset, which keeps every
//! returned plan feasible for the unrounded data. When all inputs lie on the
//! grid the programme is exact.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_feasible, soc_upper_bounds, validate_inputs, ChargeLimits, ChargingPlan, PlanError,
    VehicleDayProfile,
};
use crate::scenario::PriceSchedule;

const COST_TIE: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Value {
    cost: f64,
    charges: u32,
}

fn steps_up(x: f64, step: f64) -> i64 {
    libm::ceil(x / step - 1e-9) as i64
}

fn steps_down(x: f64, step: f64) -> i64 {
    libm::floor(x / step + 1e-9) as i64
}

/// Cost-optimal plan for one vehicle.
///
/// Ties are broken towards fewer charging epochs, then towards charging
/// earlier and charging more at the earlier epoch.
pub fn solve_vehicle(
    profile: &VehicleDayProfile,
    prices: &PriceSchedule,
    limits: &ChargeLimits,
) -> Result<ChargingPlan, PlanError> {
    validate_inputs(profile, prices, limits)?;
    check_feasible(profile, limits)?;

    let n = profile.consumption.len();
    let step = limits.soc_step;
    let d = &profile.consumption;
    let drop: Vec<i64> = d.iter().map(|&x| steps_up(x, step)).collect();
    let start = steps_down(profile.e_init - limits.e_min, step).max(0);
    let k_max = steps_down(limits.u_max, step);

    let mut offset = vec![0.0; n + 1];
    offset[0] = profile.e_init - limits.e_min - start as f64 * step;
    for h in 0..n {
        offset[h + 1] = offset[h] + drop[h] as f64 * step - d[h];
    }
    let upper = soc_upper_bounds(profile, limits);
    let cap: Vec<i64> = (0..=n)
        .map(|h| steps_down(upper[h] - limits.e_min - offset[h], step))
        .collect();

    // Highest grid level a charge may reach within each epoch.
    let post_cap: Vec<i64> = (0..n)
        .map(|h| steps_down(limits.e_max - limits.e_min - offset[h], step))
        .collect();

    let infeasible_at = || PlanError::Infeasible {
        vehicle: profile.vehicle,
        epoch: grid_blocking_epoch(start, k_max, &drop, &cap, &post_cap),
    };
    if cap.iter().any(|&c| c < 0) || start > cap[0] {
        return Err(infeasible_at());
    }

    let mut value: Vec<Option<Value>> = vec![
        Some(Value {
            cost: 0.0,
            charges: 0
        });
        cap[n] as usize + 1
    ];
    let mut choice: Vec<Vec<i64>> = vec![Vec::new(); n];

    for h in (0..n).rev() {
        let width = cap[h] as usize + 1;
        let mut here: Vec<Option<Value>> = vec![None; width];
        let mut pick = vec![-1i64; width];
        let unit = prices.energy[h] * step;
        for s in 0..=cap[h] {
            let lo = (drop[h] - s).max(0);
            let hi = k_max.min(cap[h + 1] + drop[h] - s).min((post_cap[h] - s).max(0));
            let mut best: Option<(Value, i64)> = None;
            // Descending k so that equal (cost, charges) keeps the larger,
            // earlier charge.
            let mut k = hi;
            while k >= lo {
                let next = (s + k - drop[h]) as usize;
                if let Some(v) = value[next] {
                    let cand = if k > 0 {
                        Value {
                            cost: v.cost + unit * k as f64 + prices.fixed_cost,
                            charges: v.charges + 1,
                        }
                    } else {
                        v
                    };
                    let better = match best {
                        None => true,
                        Some((b, _)) => {
                            cand.cost < b.cost - COST_TIE
                                || (cand.cost <= b.cost + COST_TIE && cand.charges < b.charges)
                        }
                    };
                    if better {
                        best = Some((cand, k));
                    }
                }
                k -= 1;
            }
            if let Some((v, k)) = best {
                here[s as usize] = Some(v);
                pick[s as usize] = k;
            }
        }
        value = here;
        choice[h] = pick;
    }

    if value[start as usize].is_none() {
        return Err(infeasible_at());
    }

    let mut amount = Vec::with_capacity(n);
    let mut charge = Vec::with_capacity(n);
    let mut s = start;
    for h in 0..n {
        let k = choice[h][s as usize];
        debug_assert!(k >= 0);
        amount.push(k as f64 * step);
        charge.push(k > 0);
        s = s + k - drop[h];
    }
    Ok(ChargingPlan::from_amounts(profile, prices, amount, charge))
}

/// First epoch whose reserve cannot be met on the grid, charging the
/// maximum everywhere.
fn grid_blocking_epoch(start: i64, k_max: i64, drop: &[i64], cap: &[i64], post_cap: &[i64]) -> usize {
    let mut reach = start.min(cap[0]);
    if reach < 0 {
        return 1;
    }
    for h in 0..drop.len() {
        let post = reach.max((reach + k_max).min(post_cap[h])).min(cap[h + 1] + drop[h]);
        if post < drop[h] {
            return h + 1;
        }
        reach = post - drop[h];
    }
    drop.len().max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::day_ahead::{check_plan, solve_fleet, fleet_cost};
    use crate::scenario::VehicleId;

    fn limits(e_min: f64, e_max: f64, u_max: f64) -> ChargeLimits {
        ChargeLimits {
            e_min,
            e_max,
            u_max,
            big_m: u_max,
            soc_step: 0.1,
        }
    }

    fn derived_example() -> (VehicleDayProfile, PriceSchedule, ChargeLimits) {
        let l = limits(10.0, 100.0, 10.0);
        let p = VehicleDayProfile {
            vehicle: VehicleId(0),
            e_init: l.e_min + 4.0,
            consumption: vec![2.0, 2.0, 2.0],
        };
        let prices = PriceSchedule {
            energy: vec![0.3, 0.1, 0.2],
            fixed_cost: 0.3,
        };
        (p, prices, l)
    }

    #[test]
    fn no_demand_no_charging() {
        let l = limits(12.4, 49.6, 25.0);
        let p = VehicleDayProfile {
            vehicle: VehicleId(1),
            e_init: l.e_min,
            consumption: vec![0.0; 5],
        };
        let prices = PriceSchedule::flat(5, 0.25, 0.3);
        let plan = solve_vehicle(&p, &prices, &l).unwrap();
        assert!(plan.charge.iter().all(|&y| !y));
        assert!(plan.amount.iter().all(|&u| u == 0.0));
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn charges_in_cheapest_epoch_before_deadline() {
        let (p, prices, l) = derived_example();
        let plan = solve_vehicle(&p, &prices, &l).unwrap();
        assert_eq!(plan.charge, vec![false, true, false]);
        assert!((plan.amount[1] - 2.0).abs() < 1e-9);
        assert!((plan.cost - 0.5).abs() < 1e-9);
        assert!(check_plan(&plan, &p, &prices, &l).is_empty());
    }

    #[test]
    fn impossible_first_epoch() {
        let l = limits(10.0, 40.0, 10.0);
        let p = VehicleDayProfile {
            vehicle: VehicleId(2),
            e_init: 30.0,
            consumption: vec![l.u_max + l.e_max, 0.0],
        };
        let prices = PriceSchedule::flat(2, 0.25, 0.3);
        assert_eq!(
            solve_vehicle(&p, &prices, &l),
            Err(PlanError::Infeasible {
                vehicle: VehicleId(2),
                epoch: 1
            })
        );
    }

    #[test]
    fn fleet_is_separable() {
        let (p, prices, l) = derived_example();
        let profiles: Vec<_> = (0..3)
            .map(|i| VehicleDayProfile {
                vehicle: VehicleId(i),
                ..p.clone()
            })
            .collect();
        let plans = solve_fleet(&profiles, &prices, &l).unwrap();
        assert_eq!(plans.len(), 3);
        assert!((fleet_cost(&plans) - 1.5).abs() < 1e-9);
        assert!(solve_fleet(&[], &prices, &l).unwrap().is_empty());
    }

    #[test]
    fn off_grid_inputs_stay_feasible() {
        let l = limits(12.4, 49.6, 25.0);
        let p = VehicleDayProfile {
            vehicle: VehicleId(0),
            e_init: 62.0,
            consumption: vec![3.337, 4.91, 7.123, 2.2, 6.05, 8.999, 0.013, 5.5, 7.7, 3.3],
        };
        let prices = PriceSchedule::flat(10, 0.25, 0.3);
        let plan = solve_vehicle(&p, &prices, &l).unwrap();
        assert!(check_plan(&plan, &p, &prices, &l).is_empty(), "{:?}", check_plan(&plan, &p, &prices, &l));
    }

    #[test]
    fn starting_above_e_max_is_allowed() {
        let l = limits(12.4, 49.6, 25.0);
        let p = VehicleDayProfile {
            vehicle: VehicleId(0),
            e_init: 62.0,
            consumption: vec![10.0; 8],
        };
        let prices = PriceSchedule::flat(8, 0.25, 0.3);
        let plan = solve_vehicle(&p, &prices, &l).unwrap();
        // 80 kWh needed, 49.6 usable from the start: 30.4 kWh must be bought.
        let bought: f64 = plan.amount.iter().sum();
        assert!((bought - 30.4).abs() < 1e-9);
        assert_eq!(plan.charge_count(), 2);
        assert!(check_plan(&plan, &p, &prices, &l).is_empty());
    }
}
