use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AssignmentInstance, AssignmentSolution, STRICT_EPS};

const TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Shape,
    OneChargerPerVehicle,
    ChargerCapacity,
    ReserveOnArrival,
    TargetLevel,
    EnergyLink,
    WaitLink,
    OccupiedStart,
    OccupiedWait,
    FreeArrival,
    NonNegative,
    Objective,
}

/// A violated constraint. `slack` is negative: the amount by which the
/// left-hand side misses the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub vehicle: Option<usize>,
    pub charger: Option<usize>,
    pub slack: f64,
}

/// Evaluates every constraint of the assignment model on the decision
/// values as given, without trusting the solver's derivations.
pub fn verify_solution(inst: &AssignmentInstance, sol: &AssignmentSolution) -> Vec<Violation> {
    let (n, m) = (inst.vehicle_count(), inst.charger_count());
    let mut out = Vec::new();
    let mut check = |constraint, vehicle, charger, slack: f64| {
        if slack < -TOL || slack.is_nan() {
            out.push(Violation {
                constraint,
                vehicle,
                charger,
                slack,
            });
        }
    };
    let dims = |r: usize, c: usize| r == n && c == m;
    if !dims(sol.x.rows(), sol.x.cols())
        || !dims(sol.energy.rows(), sol.energy.cols())
        || !dims(sol.wait.rows(), sol.wait.cols())
        || sol.occupied_start.len() != m
    {
        check(Constraint::Shape, None, None, -1.0);
        return out;
    }
    let x = |i: usize, j: usize| if sol.x[(i, j)] { 1.0 } else { 0.0 };
    let w = |j: usize| if sol.occupied_start[j] { 1.0 } else { 0.0 };
    let (m1, m2) = (inst.big_m1, inst.big_m2);

    for i in 0..n {
        let assigned: f64 = (0..m).map(|j| x(i, j)).sum();
        check(Constraint::OneChargerPerVehicle, Some(i), None, -(assigned - 1.0).abs());
        let drive: f64 = (0..m)
            .map(|j| inst.consumption_rate * inst.distance_km[(i, j)] * x(i, j))
            .sum();
        let charged: f64 = (0..m).map(|j| sol.energy[(i, j)]).sum();
        check(
            Constraint::ReserveOnArrival,
            Some(i),
            None,
            inst.soc[i] - drive - inst.e_min,
        );
        check(
            Constraint::TargetLevel,
            Some(i),
            None,
            inst.soc[i] - drive + charged - inst.target[i],
        );
    }
    for j in 0..m {
        let load: f64 = (0..n).map(|i| x(i, j)).sum();
        check(Constraint::ChargerCapacity, None, Some(j), 1.0 - load);
        check(Constraint::FreeArrival, None, Some(j), load - w(j));
        for i in 0..n {
            let (y, s) = (sol.energy[(i, j)], sol.wait[(i, j)]);
            check(Constraint::NonNegative, Some(i), Some(j), y.min(s));
            check(Constraint::EnergyLink, Some(i), Some(j), m1 * x(i, j) - y);
            check(Constraint::WaitLink, Some(i), Some(j), m2 * x(i, j) - s);
            let win = inst.windows[(i, j)];
            let t = inst.travel_min[(i, j)];
            let off = m2 * (1.0 - x(i, j));
            // W_j = 1 exactly when the assigned arrival is not strictly
            // before the window start.
            check(
                Constraint::OccupiedStart,
                Some(i),
                Some(j),
                (t - win.start + STRICT_EPS) + m2 * (1.0 - w(j)) + off,
            );
            check(
                Constraint::OccupiedStart,
                Some(i),
                Some(j),
                (win.start - t - STRICT_EPS) + m2 * w(j) + off,
            );
            check(
                Constraint::OccupiedWait,
                Some(i),
                Some(j),
                s - (win.end - t) + m2 * (1.0 - w(j)) + off,
            );
        }
    }
    let z = inst.objective(&sol.x, &sol.energy, &sol.wait);
    check(
        Constraint::Objective,
        None,
        None,
        -(z - sol.objective).abs() / z.abs().max(1.0),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::fixtures::instance;
    use crate::assignment::solve_exact;
    use crate::occupancy::ArrivalWindow;
    use alloc::vec;

    fn kinds(v: &[Violation]) -> Vec<Constraint> {
        v.iter().map(|v| v.constraint).collect()
    }

    #[test]
    fn detects_corruptions() {
        let mut inst = instance(vec![vec![5.0, 7.0]], vec![40.0], vec![49.6]);
        inst.windows[(0, 0)] = ArrivalWindow {
            start: 2.0,
            end: 20.0,
            occupied_on_arrival: true,
        };
        let sol = solve_exact(&inst).unwrap();
        assert!(verify_solution(&inst, &sol).is_empty());

        let mut s = sol.clone();
        s.x[(0, 0)] = !s.x[(0, 0)];
        s.x[(0, 1)] = !s.x[(0, 1)];
        assert!(!verify_solution(&inst, &s).is_empty());

        let mut s = sol.clone();
        let j = s.charger_of(0).unwrap();
        s.energy[(0, j)] -= 1.0;
        assert!(kinds(&verify_solution(&inst, &s)).contains(&Constraint::TargetLevel));

        let mut s = sol.clone();
        s.occupied_start[j] = !s.occupied_start[j];
        let k = kinds(&verify_solution(&inst, &s));
        assert!(k.contains(&Constraint::OccupiedStart) || k.contains(&Constraint::OccupiedWait));

        let mut s = sol.clone();
        s.objective += 1.0;
        assert_eq!(kinds(&verify_solution(&inst, &s)), vec![Constraint::Objective]);
    }

    #[test]
    fn double_booking_detected() {
        let inst = instance(vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![40.0; 2], vec![45.0; 2]);
        let mut s = solve_exact(&inst).unwrap();
        s.x[(1, 1)] = false;
        s.x[(1, 0)] = true;
        s.energy[(1, 0)] = s.energy[(1, 1)];
        s.energy[(1, 1)] = 0.0;
        s.occupied_start[1] = false;
        let k = kinds(&verify_solution(&inst, &s));
        assert!(k.contains(&Constraint::ChargerCapacity));
    }
}
