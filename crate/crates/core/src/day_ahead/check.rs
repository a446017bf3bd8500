use alloc::vec::Vec;

use super::{soc_upper_bounds, ChargeLimits, ChargingPlan, VehicleDayProfile};
use crate::scenario::{PriceSchedule, ENERGY_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanViolationKind {
    /// Vector lengths disagree with the horizon.
    Shape,
    InitialLevel,
    /// SOC recursion `e[h+1] = e[h] + u[h] - d[h]`.
    EnergyBalance,
    /// `e[h] + u[h] >= d[h] + e_min`.
    EpochReserve,
    /// `u[h] <= M * y[h]`.
    ChargeIndicator,
    /// `e_min <= e[h] <= upper bound`.
    LevelBounds,
    /// `0 <= u[h] <= u_max`.
    ChargeLimit,
    /// `e[h] + u[h] <= e_max` in charging epochs.
    PostChargeLevel,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanViolation {
    pub kind: PlanViolationKind,
    /// 1-based epoch; `len + 1` addresses the end-of-day level.
    pub epoch: usize,
    /// How far the constraint is violated.
    pub excess: f64,
}

/// Re-evaluates every scheduling constraint on a finished plan.
pub fn check_plan(
    plan: &ChargingPlan,
    profile: &VehicleDayProfile,
    prices: &PriceSchedule,
    limits: &ChargeLimits,
) -> Vec<PlanViolation> {
    use PlanViolationKind::*;
    let tol = ENERGY_TOLERANCE;
    let n = profile.consumption.len();
    let mut out = Vec::new();
    let mut push = |kind, epoch, excess: f64| {
        if excess > tol {
            out.push(PlanViolation {
                kind,
                epoch,
                excess,
            });
        }
    };
    if plan.charge.len() != n
        || plan.amount.len() != n
        || plan.soc.len() != n + 1
        || prices.energy.len() != n
    {
        push(Shape, 0, f64::INFINITY);
        return out;
    }
    push(InitialLevel, 1, (plan.soc[0] - profile.e_init).abs());
    let upper = soc_upper_bounds(profile, limits);
    let mut cost = 0.0;
    for h in 0..n {
        let e = plan.soc[h];
        let u = plan.amount[h];
        let d = profile.consumption[h];
        let y = if plan.charge[h] { 1.0 } else { 0.0 };
        push(EnergyBalance, h + 1, (plan.soc[h + 1] - (e + u - d)).abs());
        push(EpochReserve, h + 1, (d + limits.e_min) - (e + u));
        push(ChargeIndicator, h + 1, u - limits.big_m * y);
        push(ChargeLimit, h + 1, (-u).max(u - limits.u_max));
        if plan.charge[h] {
            push(PostChargeLevel, h + 1, e + u - limits.e_max);
        }
        cost += prices.energy[h] * u + prices.fixed_cost * y;
    }
    for h in 0..=n {
        let e = plan.soc[h];
        push(LevelBounds, h + 1, (limits.e_min - e).max(e - upper[h]));
    }
    push(Cost, 0, (plan.cost - cost).abs());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::VehicleId;
    use alloc::vec;

    fn setup() -> (ChargingPlan, VehicleDayProfile, PriceSchedule, ChargeLimits) {
        let l = ChargeLimits {
            e_min: 10.0,
            e_max: 30.0,
            u_max: 5.0,
            big_m: 5.0,
            soc_step: 0.1,
        };
        let p = VehicleDayProfile {
            vehicle: VehicleId(0),
            e_init: 12.0,
            consumption: vec![1.0, 3.0],
        };
        let prices = PriceSchedule::flat(2, 0.2, 0.3);
        let plan = ChargingPlan::from_amounts(&p, &prices, vec![2.0, 0.0], vec![true, false]);
        (plan, p, prices, l)
    }

    #[test]
    fn valid_plan_is_clean() {
        let (plan, p, prices, l) = setup();
        assert!(check_plan(&plan, &p, &prices, &l).is_empty());
    }

    #[test]
    fn detects_each_corruption() {
        let (plan, p, prices, l) = setup();

        let mut bad = plan.clone();
        bad.charge[0] = false;
        let kinds: Vec<_> = check_plan(&bad, &p, &prices, &l).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&PlanViolationKind::ChargeIndicator));

        let mut bad = plan.clone();
        bad.amount[0] = 7.0;
        bad.soc[1] = 18.0;
        bad.soc[2] = 15.0;
        let kinds: Vec<_> = check_plan(&bad, &p, &prices, &l).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&PlanViolationKind::ChargeLimit));

        let mut bad = plan.clone();
        bad.soc[2] += 1.0;
        let kinds: Vec<_> = check_plan(&bad, &p, &prices, &l).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&PlanViolationKind::EnergyBalance));

        let mut bad = plan.clone();
        bad.amount[0] = 0.0;
        bad.charge[0] = false;
        bad.soc[1] = 11.0;
        bad.soc[2] = 8.0;
        let kinds: Vec<_> = check_plan(&bad, &p, &prices, &l).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&PlanViolationKind::EpochReserve));
        assert!(kinds.contains(&PlanViolationKind::LevelBounds));
        assert!(kinds.contains(&PlanViolationKind::Cost));
    }

    #[test]
    fn charge_above_e_max_is_flagged() {
        let (_, mut p, prices, l) = setup();
        p.e_init = 28.0;
        p.consumption = vec![4.0, 0.0];
        let plan = ChargingPlan::from_amounts(&p, &prices, vec![4.0, 0.0], vec![true, false]);
        let kinds: Vec<_> = check_plan(&plan, &p, &prices, &l).iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![PlanViolationKind::PostChargeLevel]);
    }
}
