//! Seeded synthetic demand: ride requests for the fleet and charging
//! sessions of outside (non-fleet) EVs at the public chargers.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::occupancy::ChargingSessionRecord;
use crate::rng::{self, streams};
use crate::scenario::{ChargerId, RequestId, MINUTES_PER_DAY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("service region has zero area")]
    DegenerateRegion,
    #[error("arrival profile must have non-negative rates and positive total mass")]
    InvalidProfile,
    #[error("party size weights must be non-negative, non-empty and fit the seats")]
    InvalidPartySizes,
    #[error("invalid exogenous session settings")]
    InvalidExogenous,
    #[error("notice must be non-negative")]
    InvalidNotice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RideRequest {
    pub id: RequestId,
    /// When the request is placed, minutes after midnight.
    pub arrival: f64,
    pub desired_pickup: f64,
    pub pickup: Point,
    pub dropoff: Point,
    pub party_size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        (self.min.x..=self.max.x).contains(&p.x) && (self.min.y..=self.max.y).contains(&p.y)
    }

    fn sample(&self, rng: &mut impl Rng) -> Point {
        Point::new(
            self.min.x + rng.gen::<f64>() * (self.max.x - self.min.x),
            self.min.y + rng.gen::<f64>() * (self.max.y - self.min.y),
        )
    }
}

impl Default for Region {
    fn default() -> Self {
        Self {
            min: Point::new(0.0, 0.0),
            max: Point::new(30.0, 20.0),
        }
    }
}

/// Constant arrival rate over `[start, end)` minutes, relative units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSegment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

/// Piecewise-constant arrival-time density over the operating day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProfile {
    pub segments: Vec<ProfileSegment>,
}

impl ArrivalProfile {
    pub fn flat(start: f64, end: f64) -> Self {
        Self {
            segments: alloc::vec![ProfileSegment {
                start,
                end,
                rate: 1.0
            }],
        }
    }

    /// Off-peak rate 1 with 2.5x peaks 08:00-09:30 and 16:30-18:30.
    pub fn commuter(start: f64, end: f64) -> Self {
        let peaks = [(480.0, 570.0), (990.0, 1110.0)];
        let mut cuts = alloc::vec![start, end];
        for (a, b) in peaks {
            cuts.extend([a, b].into_iter().filter(|&c| c > start && c < end));
        }
        cuts.sort_by(f64::total_cmp);
        let segments = cuts
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let peak = peaks.iter().any(|&(a, b)| mid >= a && mid < b);
                ProfileSegment {
                    start: w[0],
                    end: w[1],
                    rate: if peak { 2.5 } else { 1.0 },
                }
            })
            .collect();
        Self { segments }
    }

    fn mass(s: &ProfileSegment) -> f64 {
        s.rate * (s.end - s.start)
    }

    pub fn total_mass(&self) -> f64 {
        self.segments.iter().map(Self::mass).sum()
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        let ok = self
            .segments
            .iter()
            .all(|s| s.rate >= 0.0 && s.end >= s.start && s.start.is_finite() && s.end.is_finite());
        if !ok || !(self.total_mass() > 0.0) {
            return Err(DemandError::InvalidProfile);
        }
        Ok(())
    }

    /// Share of arrivals before `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let below: f64 = self
            .segments
            .iter()
            .map(|s| s.rate * (t.min(s.end) - s.start).max(0.0))
            .sum();
        below / self.total_mass()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let total = self.total_mass();
        let mut u = rng.gen::<f64>() * total;
        for s in &self.segments {
            let m = Self::mass(s);
            if u < m && m > 0.0 {
                return s.start + u / s.rate;
            }
            u -= m;
        }
        // Rounding left `u` past the last positive segment.
        self.segments
            .iter()
            .rev()
            .find(|s| Self::mass(s) > 0.0)
            .map_or(0.0, |s| s.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    pub customer_count: usize,
    pub region: Region,
    /// Minutes between placing a request and the desired pickup.
    pub notice: f64,
    pub profile: ArrivalProfile,
    /// Relative weight of party sizes 1, 2, ...
    pub party_sizes: Vec<f64>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            customer_count: 800,
            region: Region::default(),
            notice: 10.0,
            profile: ArrivalProfile::commuter(390.0, 1320.0),
            party_sizes: alloc::vec![1.0],
        }
    }
}

impl DemandConfig {
    pub fn validate(&self, seats: u32) -> Result<(), DemandError> {
        let r = &self.region;
        if !(r.max.x > r.min.x && r.max.y > r.min.y) {
            return Err(DemandError::DegenerateRegion);
        }
        self.profile.validate()?;
        if !(self.notice >= 0.0) {
            return Err(DemandError::InvalidNotice);
        }
        let sum: f64 = self.party_sizes.iter().sum();
        if self.party_sizes.is_empty()
            || self.party_sizes.len() > seats as usize
            || self.party_sizes.iter().any(|&w| !(w >= 0.0))
            || !(sum > 0.0)
        {
            return Err(DemandError::InvalidPartySizes);
        }
        Ok(())
    }

    fn party_size(&self, rng: &mut impl Rng) -> u32 {
        if self.party_sizes.len() == 1 {
            return 1;
        }
        let total: f64 = self.party_sizes.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for (k, &w) in self.party_sizes.iter().enumerate() {
            if u < w {
                return k as u32 + 1;
            }
            u -= w;
        }
        self.party_sizes.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32 + 1
    }
}

/// `cfg.customer_count` requests sorted by arrival time, ids in that order.
pub fn generate(seed: u64, cfg: &DemandConfig) -> Result<Vec<RideRequest>, DemandError> {
    let r = &cfg.region;
    if !(r.max.x > r.min.x && r.max.y > r.min.y) {
        return Err(DemandError::DegenerateRegion);
    }
    cfg.profile.validate()?;
    let mut rng = rng::stream(seed, streams::DEMAND);
    let mut out: Vec<RideRequest> = (0..cfg.customer_count)
        .map(|_| {
            let arrival = cfg.profile.sample(&mut rng);
            RideRequest {
                id: RequestId(0),
                arrival,
                desired_pickup: arrival + cfg.notice,
                pickup: cfg.region.sample(&mut rng),
                dropoff: cfg.region.sample(&mut rng),
                party_size: cfg.party_size(&mut rng),
            }
        })
        .collect();
    out.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    for (k, r) in out.iter_mut().enumerate() {
        r.id = RequestId(k as u32);
    }
    Ok(out)
}

/// Outside EVs arriving at each charger as a Poisson process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExogenousConfig {
    /// Mean arrivals per hour per charger.
    pub arrivals_per_hour: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    pub start: f64,
    pub end: f64,
}

impl Default for ExogenousConfig {
    fn default() -> Self {
        Self {
            arrivals_per_hour: 0.6,
            min_duration: 20.0,
            max_duration: 50.0,
            start: 360.0,
            end: 1320.0,
        }
    }
}

impl ExogenousConfig {
    pub fn validate(&self) -> Result<(), DemandError> {
        if !(self.arrivals_per_hour >= 0.0)
            || !(self.min_duration > 0.0)
            || !(self.max_duration >= self.min_duration)
            || !(self.end >= self.start)
        {
            return Err(DemandError::InvalidExogenous);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSession {
    pub id: u32,
    pub charger: ChargerId,
    pub arrival: f64,
    /// Minutes on the charger once plugged in.
    pub duration: f64,
}

fn sessions_for(
    rng: &mut impl Rng,
    cfg: &ExogenousConfig,
    chargers: &[ChargerId],
) -> Vec<ExogenousSession> {
    let rate = cfg.arrivals_per_hour / 60.0;
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    for &c in chargers {
        let mut t = cfg.start;
        loop {
            t += -libm::log(1.0 - rng.gen::<f64>()) / rate;
            if t >= cfg.end {
                break;
            }
            let duration = cfg.min_duration + rng.gen::<f64>() * (cfg.max_duration - cfg.min_duration);
            out.push(ExogenousSession {
                id: 0,
                charger: c,
                arrival: t,
                duration,
            });
        }
    }
    out.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.charger.cmp(&b.charger)));
    for (k, s) in out.iter_mut().enumerate() {
        s.id = k as u32;
    }
    out
}

/// Outside sessions of the simulated day, sorted by arrival.
pub fn generate_exogenous(
    seed: u64,
    cfg: &ExogenousConfig,
    chargers: &[ChargerId],
) -> Result<Vec<ExogenousSession>, DemandError> {
    cfg.validate()?;
    Ok(sessions_for(&mut rng::stream(seed, streams::EXOGENOUS), cfg, chargers))
}

/// Plug-in intervals when sessions queue first-come first-served on their
/// charger with nothing else competing. Returned in input order.
pub fn fifo_intervals(sessions: &[ExogenousSession]) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by(|&a, &b| {
        sessions[a]
            .arrival
            .total_cmp(&sessions[b].arrival)
            .then(sessions[a].id.cmp(&sessions[b].id))
    });
    let mut busy: Vec<(ChargerId, f64)> = Vec::new();
    let mut out = alloc::vec![(0.0, 0.0); sessions.len()];
    for k in order {
        let s = &sessions[k];
        let free = busy
            .iter_mut()
            .find(|(c, _)| *c == s.charger)
            .map(|(_, t)| t);
        let start = match &free {
            Some(t) => s.arrival.max(**t),
            None => s.arrival,
        };
        let end = start + s.duration;
        match free {
            Some(t) => *t = end,
            None => busy.push((s.charger, end)),
        }
        out[k] = (start, end);
    }
    out
}

/// Public session records for past days (`day` is days since 1970-01-01),
/// on the absolute minute clock. Each day draws an independent sample.
pub fn exogenous_history(
    seed: u64,
    cfg: &ExogenousConfig,
    chargers: &[ChargerId],
    days: &[i64],
) -> Result<Vec<ChargingSessionRecord>, DemandError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &day in days {
        let mut rng = rng::stream(rng::derive_seed(seed, day as u64), streams::HISTORY);
        let sessions = sessions_for(&mut rng, cfg, chargers);
        let offset = day as f64 * MINUTES_PER_DAY;
        for (s, (a, b)) in sessions.iter().zip(fifo_intervals(&sessions)) {
            out.push(ChargingSessionRecord {
                charger: s.charger,
                start: offset + a,
                end: offset + b,
                energy_kwh: None,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_count_is_empty() {
        let cfg = DemandConfig {
            customer_count: 0,
            ..DemandConfig::default()
        };
        assert!(generate(1, &cfg).unwrap().is_empty());
    }

    #[test]
    fn deterministic_and_sorted() {
        let cfg = DemandConfig::default();
        let a = generate(7, &cfg).unwrap();
        let b = generate(7, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 800);
        assert!(a.windows(2).all(|w| w[0].arrival <= w[1].arrival));
        for r in &a {
            assert!(r.arrival <= r.desired_pickup);
            assert!(cfg.region.contains(r.pickup) && cfg.region.contains(r.dropoff));
            assert!((390.0..1320.0).contains(&r.arrival));
            assert_eq!(r.party_size, 1);
        }
        assert_ne!(a, generate(8, &cfg).unwrap());
    }

    #[test]
    fn degenerate_region_rejected() {
        let mut cfg = DemandConfig::default();
        cfg.region.max.y = cfg.region.min.y;
        assert_eq!(generate(1, &cfg), Err(DemandError::DegenerateRegion));
    }

    #[test]
    fn commuter_profile_shape() {
        let p = ArrivalProfile::commuter(390.0, 1320.0);
        let total = p.total_mass();
        assert!((total - (930.0 + 1.5 * 210.0)).abs() < 1e-9);
        assert!((p.cdf(1320.0) - 1.0).abs() < 1e-12);
        assert_eq!(p.cdf(390.0), 0.0);
        assert!((p.cdf(480.0) - 90.0 / total).abs() < 1e-12);
    }

    #[test]
    fn party_sizes_follow_weights() {
        let cfg = DemandConfig {
            party_sizes: vec![0.0, 1.0],
            customer_count: 50,
            ..DemandConfig::default()
        };
        assert!(generate(3, &cfg).unwrap().iter().all(|r| r.party_size == 2));
        assert!(cfg.validate(4).is_ok());
        assert_eq!(cfg.validate(1), Err(DemandError::InvalidPartySizes));
    }

    #[test]
    fn fifo_sessions_do_not_overlap() {
        let s = vec![
            ExogenousSession { id: 0, charger: ChargerId(0), arrival: 10.0, duration: 30.0 },
            ExogenousSession { id: 1, charger: ChargerId(0), arrival: 20.0, duration: 30.0 },
            ExogenousSession { id: 2, charger: ChargerId(1), arrival: 20.0, duration: 5.0 },
        ];
        assert_eq!(fifo_intervals(&s), vec![(10.0, 40.0), (40.0, 70.0), (20.0, 25.0)]);
    }

    #[test]
    fn exogenous_rate_roughly_matches() {
        let cfg = ExogenousConfig::default();
        let chargers: Vec<ChargerId> = (0..9).map(ChargerId).collect();
        let days: Vec<i64> = (0..20).collect();
        let recs = exogenous_history(5, &cfg, &chargers, &days).unwrap();
        let expected = 0.6 * 16.0 * 9.0 * 20.0;
        let n = recs.len() as f64;
        assert!((n - expected).abs() < 4.0 * libm::sqrt(expected), "{n} vs {expected}");
    }
}
