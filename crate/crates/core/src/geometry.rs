//! Planar geometry. Locations are kilometres on a Euclidean plane and every
//! vehicle moves at one constant speed.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    /// Point at fraction `f` of the way from `self` to `other`.
    pub fn lerp(self, other: Point, f: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * f, self.y + (other.y - self.y) * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Travel {
    pub distance_km: f64,
    pub minutes: f64,
}

/// Distance and driving time between two locations at `speed_kmh`.
pub fn travel(a: Point, b: Point, speed_kmh: f64) -> Travel {
    let distance_km = a.distance(b);
    Travel {
        distance_km,
        minutes: distance_km / speed_kmh * 60.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points_are_free() {
        let p = Point::new(3.5, -1.0);
        assert_eq!(travel(p, p, 65.0), Travel { distance_km: 0.0, minutes: 0.0 });
    }

    #[test]
    fn pythagorean_leg() {
        let t = travel(Point::new(0.0, 0.0), Point::new(3.0, 4.0), 60.0);
        assert!((t.distance_km - 5.0).abs() < 1e-12);
        assert!((t.minutes - 5.0).abs() < 1e-12);
    }

    #[test]
    fn default_speed_leg() {
        let t = travel(Point::new(0.0, 0.0), Point::new(0.0, 13.0), 65.0);
        assert!((t.distance_km - 13.0).abs() < 1e-12);
        assert!((t.minutes - 12.0).abs() < 1e-12);
    }

    fn point() -> impl Strategy<Value = Point> {
        (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| Point::new(x, y))
    }

    proptest! {
        #[test]
        fn metric_axioms(a in point(), b in point(), c in point()) {
            let ab = travel(a, b, 65.0);
            let ba = travel(b, a, 65.0);
            prop_assert_eq!(ab.distance_km, ba.distance_km);
            prop_assert!(ab.distance_km >= 0.0);
            prop_assert_eq!(ab.distance_km == 0.0, a == b);
            let ac = a.distance(c);
            prop_assert!(ac <= a.distance(b) + b.distance(c) + 1e-9);
        }
    }
}
