//! Greedy cheapest insertion of ride requests into vehicle routes.

use alloc::vec::Vec;

use crate::demand::RideRequest;
use crate::geometry::Point;

/// A passenger is never on board longer than this multiple of the direct
/// ride time plus [`DETOUR_SLACK`] minutes.
pub const DETOUR_FACTOR: f64 = 1.5;
pub const DETOUR_SLACK: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub kind: StopKind,
    /// Index into the day's request list.
    pub request: usize,
    pub location: Point,
    /// The vehicle waits here until this time.
    pub earliest: f64,
}

impl Stop {
    pub fn pickup(request: usize, r: &RideRequest) -> Self {
        Self {
            kind: StopKind::Pickup,
            request,
            location: r.pickup,
            earliest: r.desired_pickup,
        }
    }

    pub fn dropoff(request: usize, r: &RideRequest) -> Self {
        Self {
            kind: StopKind::Dropoff,
            request,
            location: r.dropoff,
            earliest: f64::NEG_INFINITY,
        }
    }
}

pub struct RouteContext<'a> {
    pub requests: &'a [RideRequest],
    /// Realised pickup times of passengers already picked up.
    pub pickup_time: &'a [Option<f64>],
    pub chargers: &'a [Point],
    pub seats: u32,
    pub speed_kmh: f64,
    pub consumption_rate: f64,
    pub e_min: f64,
    pub max_pickup_delay: f64,
}

impl RouteContext<'_> {
    fn minutes(&self, km: f64) -> f64 {
        km / self.speed_kmh * 60.0
    }

    fn max_ride(&self, r: &RideRequest) -> f64 {
        DETOUR_FACTOR * self.minutes(r.pickup.distance(r.dropoff)) + DETOUR_SLACK
    }

    pub fn nearest_charger_km(&self, p: Point) -> f64 {
        self.chargers
            .iter()
            .map(|c| p.distance(*c))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Where route planning starts: the location, time, SOC and load once the
/// stop currently being driven to is done.
#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub pos: Point,
    pub time: f64,
    pub soc: f64,
    pub load: u32,
    /// Pickup completed at the anchor itself, not yet recorded.
    pub pending_pickup: Option<(usize, f64)>,
}

/// Kilometres driven along `stops` from the anchor, or `None` when a
/// pickup deadline, the seat count, a ride-time limit or the reserve on
/// arrival at the nearest charger afterwards would be violated.
pub fn evaluate(anchor: &Anchor, stops: &[Stop], ctx: &RouteContext) -> Option<f64> {
    let mut pos = anchor.pos;
    let mut time = anchor.time;
    let mut load = anchor.load;
    let mut dist = 0.0;
    let mut picked: Vec<(usize, f64)> = anchor.pending_pickup.into_iter().collect();
    for s in stops {
        let d = pos.distance(s.location);
        dist += d;
        time = (time + ctx.minutes(d)).max(s.earliest);
        pos = s.location;
        let r = &ctx.requests[s.request];
        match s.kind {
            StopKind::Pickup => {
                if time > r.desired_pickup + ctx.max_pickup_delay + 1e-9 {
                    return None;
                }
                load += r.party_size;
                if load > ctx.seats {
                    return None;
                }
                picked.push((s.request, time));
            }
            StopKind::Dropoff => {
                let t0 = picked
                    .iter()
                    .find(|(q, _)| *q == s.request)
                    .map(|&(_, t)| t)
                    .or(ctx.pickup_time[s.request])?;
                if time - t0 > ctx.max_ride(r) + 1e-9 {
                    return None;
                }
                load = load.saturating_sub(r.party_size);
            }
        }
    }
    let reserve = anchor.soc - ctx.consumption_rate * (dist + ctx.nearest_charger_km(pos));
    (reserve >= ctx.e_min - 1e-9).then_some(dist)
}

fn route_km(anchor: &Anchor, stops: &[Stop]) -> f64 {
    let mut pos = anchor.pos;
    let mut d = 0.0;
    for s in stops {
        d += pos.distance(s.location);
        pos = s.location;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub added_km: f64,
    /// Pickup goes before `rest[pickup_at]`, dropoff before
    /// `rest[dropoff_at]` of the original slice.
    pub pickup_at: usize,
    pub dropoff_at: usize,
}

/// Cheapest feasible way to add request `request` to the stops after the
/// anchor. Ties keep the earliest positions.
pub fn best_insertion(
    anchor: &Anchor,
    rest: &[Stop],
    request: usize,
    ctx: &RouteContext,
) -> Option<Insertion> {
    let r = &ctx.requests[request];
    let base = route_km(anchor, rest);
    let (p_stop, d_stop) = (Stop::pickup(request, r), Stop::dropoff(request, r));
    let mut best: Option<Insertion> = None;
    let mut seq = Vec::with_capacity(rest.len() + 2);
    for p in 0..=rest.len() {
        for q in p..=rest.len() {
            seq.clear();
            seq.extend_from_slice(&rest[..p]);
            seq.push(p_stop);
            seq.extend_from_slice(&rest[p..q]);
            seq.push(d_stop);
            seq.extend_from_slice(&rest[q..]);
            let Some(km) = evaluate(anchor, &seq, ctx) else {
                continue;
            };
            let added = km - base;
            if best.map_or(true, |b| added < b.added_km - 1e-9) {
                best = Some(Insertion {
                    added_km: added,
                    pickup_at: p,
                    dropoff_at: q,
                });
            }
        }
    }
    best
}

/// Applies an insertion to `rest`.
pub fn apply(rest: &mut Vec<Stop>, request: usize, r: &RideRequest, ins: Insertion) {
    rest.insert(ins.dropoff_at, Stop::dropoff(request, r));
    rest.insert(ins.pickup_at, Stop::pickup(request, r));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::RequestId;

    fn req(id: u32, from: (f64, f64), to: (f64, f64), at: f64) -> RideRequest {
        RideRequest {
            id: RequestId(id),
            arrival: at - 10.0,
            desired_pickup: at,
            pickup: Point::new(from.0, from.1),
            dropoff: Point::new(to.0, to.1),
            party_size: 1,
        }
    }

    fn ctx<'a>(requests: &'a [RideRequest], picked: &'a [Option<f64>], chargers: &'a [Point]) -> RouteContext<'a> {
        RouteContext {
            requests,
            pickup_time: picked,
            chargers,
            seats: 1,
            speed_kmh: 60.0,
            consumption_rate: 0.2,
            e_min: 10.0,
            max_pickup_delay: 30.0,
        }
    }

    fn anchor(x: f64, soc: f64) -> Anchor {
        Anchor {
            pos: Point::new(x, 0.0),
            time: 0.0,
            soc,
            load: 0,
            pending_pickup: None,
        }
    }

    #[test]
    fn idle_vehicle_at_pickup_has_zero_deadhead() {
        let rs = [req(0, (0.0, 0.0), (6.0, 0.0), 10.0)];
        let picked = [None];
        let chargers = [Point::new(6.0, 0.0)];
        let c = ctx(&rs, &picked, &chargers);
        let ins = best_insertion(&anchor(0.0, 40.0), &[], 0, &c).unwrap();
        assert_eq!(ins.added_km, 6.0);
    }

    #[test]
    fn seat_capacity_forces_sequential_service() {
        let rs = [
            req(0, (0.0, 0.0), (10.0, 0.0), 0.0),
            req(1, (1.0, 0.0), (9.0, 0.0), 0.0),
        ];
        let picked = [None, None];
        let chargers = [Point::new(0.0, 0.0)];
        let c = ctx(&rs, &picked, &chargers);
        let a = anchor(0.0, 40.0);
        let mut rest = Vec::new();
        let ins = best_insertion(&a, &rest, 0, &c).unwrap();
        apply(&mut rest, 0, &rs[0], ins);
        let ins = best_insertion(&a, &rest, 1, &c).unwrap();
        // One seat: request 1 waits until request 0 is dropped off.
        assert_eq!(ins.pickup_at, 2);
    }

    #[test]
    fn late_pickup_is_infeasible() {
        let rs = [req(0, (40.0, 0.0), (41.0, 0.0), 0.0)];
        let picked = [None];
        let chargers = [Point::new(0.0, 0.0)];
        let c = ctx(&rs, &picked, &chargers);
        assert!(best_insertion(&anchor(0.0, 40.0), &[], 0, &c).is_none());
    }

    #[test]
    fn reserve_includes_trip_to_charger() {
        let rs = [req(0, (0.0, 0.0), (10.0, 0.0), 0.0)];
        let picked = [None];
        let chargers = [Point::new(0.0, 0.0)];
        let c = ctx(&rs, &picked, &chargers);
        // 10 km out and 10 km back to the charger: 4 kWh.
        assert!(best_insertion(&anchor(0.0, 14.0), &[], 0, &c).is_some());
        assert!(best_insertion(&anchor(0.0, 13.9), &[], 0, &c).is_none());
    }
}
