use alloc::vec;
use alloc::vec::Vec;

use super::{blocked_vehicles, build_solution, AssignmentError, AssignmentInstance, AssignmentSolution, Optimality};

/// Largest vehicle or charger count accepted by [`solve_exact`].
pub const EXACT_LIMIT: usize = 8;

/// Optimal assignment by depth-first enumeration of every injective
/// vehicle-to-charger map. Among equal objectives the lexicographically
/// smallest (vehicle, charger) pairing wins.
pub fn solve_exact(inst: &AssignmentInstance) -> Result<AssignmentSolution, AssignmentError> {
    inst.validate()?;
    let (n, m) = (inst.vehicle_count(), inst.charger_count());
    if n > EXACT_LIMIT || m > EXACT_LIMIT {
        return Err(AssignmentError::TooLargeForExact {
            vehicles: n,
            chargers: m,
            limit: EXACT_LIMIT,
        });
    }
    let costs = inst.cost_table();
    let mut search = Search {
        costs: &costs,
        used: vec![false; m],
        current: Vec::with_capacity(n),
        best: None,
    };
    search.descend(0, 0.0);
    match search.best {
        Some((_, assign)) => Ok(build_solution(inst, &assign, Optimality::Exact)),
        None => Err(AssignmentError::Infeasible {
            blocked: blocked_vehicles(inst, &costs),
        }),
    }
}

struct Search<'a> {
    costs: &'a [Vec<Option<f64>>],
    used: Vec<bool>,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, i: usize, partial: f64) {
        // Pair costs are non-negative, so a partial sum that already
        // reaches the incumbent cannot win.
        if let Some((b, _)) = &self.best {
            if partial >= *b - 1e-12 {
                return;
            }
        }
        if i == self.costs.len() {
            self.best = Some((partial, self.current.clone()));
            return;
        }
        for j in 0..self.used.len() {
            if self.used[j] {
                continue;
            }
            let Some(c) = self.costs[i][j] else { continue };
            self.used[j] = true;
            self.current.push(j);
            self.descend(i + 1, partial + c);
            self.current.pop();
            self.used[j] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::fixtures::instance;
    use crate::assignment::verify_solution;
    use crate::occupancy::ArrivalWindow;
    use crate::scenario::VehicleId;

    #[test]
    fn single_vehicle_free_charger() {
        let inst = instance(vec![vec![5.0]], vec![40.0], vec![49.6]);
        let sol = solve_exact(&inst).unwrap();
        assert!(sol.x[(0, 0)]);
        assert!((sol.energy[(0, 0)] - 10.62).abs() < 1e-12);
        assert_eq!(sol.wait[(0, 0)], 0.0);
        assert!((sol.objective - 5.3186).abs() < 1e-9);
        assert!(verify_solution(&inst, &sol).is_empty());
    }

    #[test]
    fn occupied_charger_adds_weighted_wait() {
        let mut inst = instance(vec![vec![5.0]], vec![40.0], vec![49.6]);
        inst.windows[(0, 0)] = ArrivalWindow {
            start: 0.0,
            end: 15.0,
            occupied_on_arrival: true,
        };
        let sol = solve_exact(&inst).unwrap();
        assert_eq!(sol.wait[(0, 0)], 10.0);
        assert!(sol.occupied_start[0]);
        assert!((sol.objective - (5.3186 + 5.0)).abs() < 1e-9);
        assert!(verify_solution(&inst, &sol).is_empty());
    }

    #[test]
    fn reserve_level_vehicle_is_blocked() {
        let inst = instance(vec![vec![2.0, 3.0]], vec![12.4], vec![30.0]);
        assert_eq!(
            solve_exact(&inst),
            Err(AssignmentError::Infeasible {
                blocked: vec![VehicleId(0)]
            })
        );
    }

    #[test]
    fn ties_pick_smallest_pairs() {
        let inst = instance(vec![vec![4.0, 4.0, 4.0], vec![4.0, 4.0, 4.0]], vec![30.0, 30.0], vec![40.0, 40.0]);
        let sol = solve_exact(&inst).unwrap();
        assert_eq!(sol.pairs(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn avoids_double_booking() {
        let inst = instance(
            vec![vec![1.0, 10.0], vec![2.0, 4.0]],
            vec![30.0, 30.0],
            vec![40.0, 40.0],
        );
        let sol = solve_exact(&inst).unwrap();
        assert_eq!(sol.pairs(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn size_limits() {
        let inst = instance(vec![vec![1.0; 9]], vec![30.0], vec![40.0]);
        assert!(matches!(solve_exact(&inst), Err(AssignmentError::TooLargeForExact { .. })));
        let inst = instance(vec![vec![1.0], vec![1.0]], vec![30.0; 2], vec![40.0; 2]);
        assert!(matches!(solve_exact(&inst), Err(AssignmentError::TooManyVehicles { .. })));
    }
}
