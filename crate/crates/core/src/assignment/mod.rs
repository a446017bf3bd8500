//! Per-epoch assignment of the vehicles due to charge onto chargers.
//!
//! The objective adds access time, weighted charging time and weighted
//! expected waiting time. Because the objective grows with the charged
//! amount, the amount on an assigned pair is always the least that reaches
//! the planned level after driving to the charger. Waiting follows the
//! forecast window at the arrival time. That collapses the model to a
//! one-to-one assignment with a fixed cost per (vehicle, charger) pair,
//! solved exactly by enumeration for small cases or by Lagrangian
//! relaxation of the charger capacities.

mod exact;
mod lagrangian;
mod verify;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::matrix::Matrix;
use crate::occupancy::ArrivalWindow;
use crate::scenario::{ChargerId, VehicleId, ENERGY_TOLERANCE};

pub use exact::{solve_exact, EXACT_LIMIT};
pub use lagrangian::{solve_lagrangian, LagrangianOptions};
pub use verify::{verify_solution, Constraint, Violation};

/// Tightening applied to the strict free-arrival inequality, minutes.
pub const STRICT_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("malformed instance: {0}")]
    Shape(&'static str),
    #[error("{vehicles} vehicles exceed {chargers} chargers")]
    TooManyVehicles { vehicles: usize, chargers: usize },
    #[error("enumeration handles at most {limit} vehicles and chargers, got {vehicles}x{chargers}")]
    TooLargeForExact {
        vehicles: usize,
        chargers: usize,
        limit: usize,
    },
    #[error("no feasible assignment; blocked vehicles: {blocked:?}")]
    Infeasible { blocked: Vec<VehicleId> },
}

/// Inputs of one assignment round. Times are minutes after the start of
/// the epoch, windows included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInstance {
    pub vehicles: Vec<VehicleId>,
    pub chargers: Vec<ChargerId>,
    pub travel_min: Matrix<f64>,
    pub distance_km: Matrix<f64>,
    /// SOC at the start of the epoch, kWh.
    pub soc: Vec<f64>,
    /// Planned post-charge SOC, kWh.
    pub target: Vec<f64>,
    pub windows: Matrix<ArrivalWindow>,
    /// kWh per minute per charger.
    pub rates: Vec<f64>,
    /// kWh per km.
    pub consumption_rate: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub big_m1: f64,
    pub big_m2: f64,
    pub e_min: f64,
}

/// Cost and derived quantities of sending vehicle `i` to charger `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub energy: f64,
    pub wait: f64,
    pub occupied_start: bool,
    pub cost: f64,
}

impl AssignmentInstance {
    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    pub fn charger_count(&self) -> usize {
        self.chargers.len()
    }

    pub fn validate(&self) -> Result<(), AssignmentError> {
        let (n, m) = (self.vehicles.len(), self.chargers.len());
        let shape_ok = |mat_rows: usize, mat_cols: usize| mat_rows == n && mat_cols == m;
        if !shape_ok(self.travel_min.rows(), self.travel_min.cols())
            || !shape_ok(self.distance_km.rows(), self.distance_km.cols())
            || !shape_ok(self.windows.rows(), self.windows.cols())
        {
            return Err(AssignmentError::Shape("matrices must be vehicles x chargers"));
        }
        if self.soc.len() != n || self.target.len() != n || self.rates.len() != m {
            return Err(AssignmentError::Shape("per-vehicle or per-charger vector length"));
        }
        if self.travel_min.iter().any(|(_, _, &t)| !(t >= 0.0))
            || self.distance_km.iter().any(|(_, _, &d)| !(d >= 0.0))
        {
            return Err(AssignmentError::Shape("travel times and distances must be >= 0"));
        }
        if self.rates.iter().any(|&r| !(r > 0.0)) {
            return Err(AssignmentError::Shape("charging rates must be positive"));
        }
        if n > m {
            return Err(AssignmentError::TooManyVehicles {
                vehicles: n,
                chargers: m,
            });
        }
        Ok(())
    }

    /// The pair's cost, or `None` when the vehicle would reach the charger
    /// below the reserve.
    pub fn edge(&self, i: usize, j: usize) -> Option<Edge> {
        let d = self.distance_km[(i, j)];
        let t = self.travel_min[(i, j)];
        let on_arrival = self.soc[i] - self.consumption_rate * d;
        if on_arrival < self.e_min - ENERGY_TOLERANCE {
            return None;
        }
        let energy = (self.target[i] - on_arrival).max(0.0);
        let w = self.windows[(i, j)];
        let occupied_start = w.start - t < STRICT_EPS;
        let wait = if occupied_start {
            (w.end - t).max(0.0)
        } else {
            0.0
        };
        let cost = t + self.theta1 * energy / self.rates[j] + self.theta2 * wait;
        Some(Edge {
            energy,
            wait,
            occupied_start,
            cost,
        })
    }

    pub(crate) fn cost_table(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.vehicle_count())
            .map(|i| {
                (0..self.charger_count())
                    .map(|j| self.edge(i, j).map(|e| e.cost))
                    .collect()
            })
            .collect()
    }

    /// Weighted objective of arbitrary decision values.
    pub fn objective(&self, x: &Matrix<bool>, energy: &Matrix<f64>, wait: &Matrix<f64>) -> f64 {
        let mut access = 0.0;
        let mut charging = 0.0;
        let mut waiting = 0.0;
        for i in 0..self.vehicle_count() {
            for j in 0..self.charger_count() {
                if x[(i, j)] {
                    access += self.travel_min[(i, j)];
                }
                charging += energy[(i, j)] / self.rates[j];
                waiting += wait[(i, j)];
            }
        }
        access + self.theta1 * charging + self.theta2 * waiting
    }
}

/// A random instance with the default fleet parameters: vehicles and
/// chargers scattered over a 12 km square, random battery levels, and a mix
/// of free chargers, chargers busy on arrival, and chargers that become busy
/// later in the hour.
pub fn sample_instance(rng: &mut impl Rng, vehicles: usize, chargers: usize) -> AssignmentInstance {
    let horizon = 60.0;
    let mut place = || Point::new(rng.gen_range(0.0..12.0), rng.gen_range(0.0..12.0));
    let vpos: Vec<Point> = (0..vehicles).map(|_| place()).collect();
    let cpos: Vec<Point> = (0..chargers).map(|_| place()).collect();
    let distance_km = Matrix::from_fn(vehicles, chargers, |i, j| vpos[i].distance(cpos[j]));
    let travel_min = Matrix::from_fn(vehicles, chargers, |i, j| distance_km[(i, j)] / 65.0 * 60.0);
    let windows = Matrix::from_fn(vehicles, chargers, |i, j| {
        let t = travel_min[(i, j)];
        match rng.gen_range(0..3) {
            0 => ArrivalWindow::free(horizon),
            1 => ArrivalWindow {
                start: rng.gen_range(0.0..=t),
                end: t + rng.gen_range(0.0..40.0),
                occupied_on_arrival: true,
            },
            _ => {
                let start = t + rng.gen_range(0.0..30.0);
                ArrivalWindow {
                    start,
                    end: start + rng.gen_range(5.0..40.0),
                    occupied_on_arrival: false,
                }
            }
        }
    });
    AssignmentInstance {
        vehicles: (0..vehicles as u32).map(VehicleId).collect(),
        chargers: (0..chargers as u32).map(ChargerId).collect(),
        travel_min,
        distance_km,
        soc: (0..vehicles).map(|_| rng.gen_range(14.0..40.0)).collect(),
        target: (0..vehicles).map(|_| rng.gen_range(40.0..=49.6)).collect(),
        windows,
        rates: alloc::vec![50.0 / 60.0; chargers],
        consumption_rate: 0.204,
        theta1: 0.025,
        theta2: 0.5,
        big_m1: 62.0,
        big_m2: 930.0,
        e_min: 12.4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimality {
    Exact,
    /// Relative gap between the returned objective and the best dual bound.
    Lagrangian { gap: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    pub x: Matrix<bool>,
    /// kWh charged per pair.
    pub energy: Matrix<f64>,
    /// Expected waiting minutes per pair.
    pub wait: Matrix<f64>,
    /// Per charger: the assigned vehicle arrives inside a forecast busy slot.
    pub occupied_start: Vec<bool>,
    pub objective: f64,
    pub optimality: Optimality,
}

impl AssignmentSolution {
    /// `(vehicle index, charger index)` pairs in vehicle order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.x
            .iter()
            .filter(|(_, _, &on)| on)
            .map(|(i, j, _)| (i, j))
            .collect()
    }

    pub fn charger_of(&self, i: usize) -> Option<usize> {
        self.x.row(i).iter().position(|&on| on)
    }
}

/// Materialises a complete assignment (`assign[i]` = charger of vehicle
/// `i`). Every pair must be feasible.
pub fn build_solution(
    inst: &AssignmentInstance,
    assign: &[usize],
    optimality: Optimality,
) -> AssignmentSolution {
    let (n, m) = (inst.vehicle_count(), inst.charger_count());
    let mut x = Matrix::filled(n, m, false);
    let mut energy = Matrix::filled(n, m, 0.0);
    let mut wait = Matrix::filled(n, m, 0.0);
    let mut occupied_start = alloc::vec![false; m];
    for (i, &j) in assign.iter().enumerate() {
        let e = inst
            .edge(i, j)
            .expect("assignment uses an infeasible pair");
        x[(i, j)] = true;
        energy[(i, j)] = e.energy;
        wait[(i, j)] = e.wait;
        occupied_start[j] = e.occupied_start;
    }
    let objective = inst.objective(&x, &energy, &wait);
    AssignmentSolution {
        x,
        energy,
        wait,
        occupied_start,
        objective,
        optimality,
    }
}

/// Maximum matching over feasible pairs (augmenting paths). Returns the
/// charger of each vehicle, if matched.
pub(crate) fn max_matching(costs: &[Vec<Option<f64>>], chargers: usize) -> Vec<Option<usize>> {
    fn augment(
        i: usize,
        costs: &[Vec<Option<f64>>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for (j, c) in costs[i].iter().enumerate() {
            if c.is_none() || seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].map_or(true, |k| augment(k, costs, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut owner = alloc::vec![None; chargers];
    for i in 0..costs.len() {
        let mut seen = alloc::vec![false; chargers];
        augment(i, costs, &mut seen, &mut owner);
    }
    let mut assign = alloc::vec![None; costs.len()];
    for (j, o) in owner.iter().enumerate() {
        if let Some(i) = o {
            assign[*i] = Some(j);
        }
    }
    assign
}

pub(crate) fn blocked_vehicles(inst: &AssignmentInstance, costs: &[Vec<Option<f64>>]) -> Vec<VehicleId> {
    max_matching(costs, inst.charger_count())
        .iter()
        .enumerate()
        .filter(|(_, j)| j.is_none())
        .map(|(i, _)| inst.vehicles[i])
        .collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;
    use crate::scenario::RAPID_CHARGER_RATE;

    /// Vehicles x chargers instance with every charger free and the
    /// case-study weights.
    pub fn instance(travel: Vec<Vec<f64>>, soc: Vec<f64>, target: Vec<f64>) -> AssignmentInstance {
        let n = travel.len();
        let m = travel[0].len();
        let travel_min = Matrix::from_fn(n, m, |i, j| travel[i][j]);
        AssignmentInstance {
            vehicles: (0..n as u32).map(VehicleId).collect(),
            chargers: (0..m as u32).map(ChargerId).collect(),
            distance_km: Matrix::from_fn(n, m, |i, j| travel[i][j]),
            travel_min,
            soc,
            target,
            windows: Matrix::filled(n, m, ArrivalWindow::free(60.0)),
            rates: vec![RAPID_CHARGER_RATE; m],
            consumption_rate: 0.204,
            theta1: 0.025,
            theta2: 0.5,
            big_m1: 62.0,
            big_m2: 930.0,
            e_min: 12.4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::instance;
    use super::*;
    use alloc::vec;

    #[test]
    fn edge_uses_least_sufficient_energy() {
        let inst = instance(vec![vec![5.0]], vec![40.0], vec![49.6]);
        let e = inst.edge(0, 0).unwrap();
        assert!((e.energy - 10.62).abs() < 1e-12);
        assert_eq!(e.wait, 0.0);
        assert!(!e.occupied_start);
        assert!((e.cost - 5.3186).abs() < 1e-9);
    }

    #[test]
    fn reserve_blocks_edge() {
        let inst = instance(vec![vec![1.0]], vec![12.4], vec![30.0]);
        assert!(inst.edge(0, 0).is_none());
    }

    #[test]
    fn matching_reports_blocked() {
        let costs = vec![vec![Some(1.0), None], vec![Some(2.0), None]];
        let m = max_matching(&costs, 2);
        assert_eq!(m.iter().filter(|x| x.is_some()).count(), 1);
    }
}
