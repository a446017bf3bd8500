use alloc::vec::Vec;

use crate::geometry::Point;
use crate::scenario::VehicleId;

/// Closest charger to `pos`; equal distances go to the lowest index.
pub fn nearest_charger(pos: Point, chargers: &[Point]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (j, c) in chargers.iter().enumerate() {
        let d = pos.distance(*c);
        if best.map_or(true, |(b, _)| d < b) {
            best = Some((d, j));
        }
    }
    best.map(|(_, j)| j)
}

/// A vehicle due to charge in the current epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub vehicle: VehicleId,
    pub soc: f64,
    /// Planned post-charge level.
    pub target: f64,
}

/// Keeps at most `capacity` candidates, lowest SOC first (ties by vehicle
/// id); the rest, with the higher battery levels, wait for the next epoch.
pub fn postpone(mut candidates: Vec<Candidate>, capacity: usize) -> (Vec<Candidate>, Vec<Candidate>) {
    candidates.sort_by(|a, b| a.soc.total_cmp(&b.soc).then(a.vehicle.cmp(&b.vehicle)));
    let later = if candidates.len() > capacity {
        candidates.split_off(capacity)
    } else {
        Vec::new()
    };
    (candidates, later)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn highest_soc_is_postponed() {
        let c = |v, soc| Candidate {
            vehicle: VehicleId(v),
            soc,
            target: 45.0,
        };
        let (now, later) = postpone(vec![c(0, 20.0), c(1, 30.0), c(2, 15.0)], 2);
        assert_eq!(now, vec![c(2, 15.0), c(0, 20.0)]);
        assert_eq!(later, vec![c(1, 30.0)]);
        let (now, later) = postpone(vec![], 9);
        assert!(now.is_empty() && later.is_empty());
    }

    #[test]
    fn nearest_charger_tie_goes_to_lowest_id() {
        let chargers = [Point::new(1.0, 0.0), Point::new(-1.0, 0.0), Point::new(0.5, 0.0)];
        assert_eq!(nearest_charger(Point::new(0.0, 0.0), &chargers[..2]), Some(0));
        assert_eq!(nearest_charger(Point::new(0.0, 0.0), &chargers), Some(2));
        assert_eq!(nearest_charger(Point::new(0.0, 0.0), &[]), None);
    }
}
