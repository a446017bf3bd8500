//! Forecast backends.
//!
//! Any model that can say, minute by minute or as a list of sessions, when a
//! charger is expected to be busy over the next horizon plugs in through
//! [`OccupancyPredictor`].

use alloc::vec;
use alloc::vec::Vec;

use super::{ChargingSessionRecord, OccupancyError, SessionBoundarySequence};
use crate::rng::keyed_unit;
use crate::scenario::{ChargerId, MINUTES_PER_DAY};

pub trait OccupancyPredictor {
    /// Forecast for `charger` over `[now, now + horizon]`.
    fn predict(
        &self,
        charger: ChargerId,
        now: f64,
        horizon: f64,
    ) -> Result<SessionBoundarySequence, OccupancyError>;
}

fn check(chargers: usize, charger: ChargerId, horizon: f64) -> Result<(), OccupancyError> {
    if charger.index() >= chargers {
        return Err(OccupancyError::UnknownCharger(charger));
    }
    if !(horizon > 0.0) {
        return Err(OccupancyError::InvalidHorizon);
    }
    Ok(())
}

/// Predicts every charger free. This is the "no forecast" backend.
#[derive(Debug, Clone, Copy)]
pub struct AlwaysFree {
    pub chargers: usize,
}

impl OccupancyPredictor for AlwaysFree {
    fn predict(
        &self,
        charger: ChargerId,
        now: f64,
        horizon: f64,
    ) -> Result<SessionBoundarySequence, OccupancyError> {
        check(self.chargers, charger, horizon)?;
        Ok(SessionBoundarySequence::from_intervals(charger, now, horizon, &[]))
    }
}

/// Reads the true sessions directly.
#[derive(Debug, Clone)]
pub struct PerfectOracle {
    /// Sorted, unioned busy intervals per charger.
    busy: Vec<Vec<(f64, f64)>>,
}

impl PerfectOracle {
    pub fn new(chargers: usize, sessions: &[ChargingSessionRecord]) -> Self {
        let mut busy = vec![Vec::new(); chargers];
        for s in sessions {
            if let Some(list) = busy.get_mut(s.charger.index()) {
                list.push((s.start, s.end));
            }
        }
        Self::from_intervals(busy)
    }

    pub fn from_intervals(mut busy: Vec<Vec<(f64, f64)>>) -> Self {
        for list in &mut busy {
            list.retain(|(s, e)| e > s);
            list.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(list.len());
            for &(s, e) in list.iter() {
                match merged.last_mut() {
                    Some(last) if s <= last.1 => last.1 = last.1.max(e),
                    _ => merged.push((s, e)),
                }
            }
            *list = merged;
        }
        Self { busy }
    }

    pub fn chargers(&self) -> usize {
        self.busy.len()
    }

    /// True state at instant `t`.
    pub fn occupied_at(&self, charger: ChargerId, t: f64) -> bool {
        let Some(list) = self.busy.get(charger.index()) else {
            return false;
        };
        let k = list.partition_point(|&(s, _)| s <= t);
        k > 0 && t < list[k - 1].1
    }

    pub fn intervals(&self, charger: ChargerId) -> &[(f64, f64)] {
        self.busy.get(charger.index()).map_or(&[], |v| v.as_slice())
    }
}

impl OccupancyPredictor for PerfectOracle {
    fn predict(
        &self,
        charger: ChargerId,
        now: f64,
        horizon: f64,
    ) -> Result<SessionBoundarySequence, OccupancyError> {
        check(self.busy.len(), charger, horizon)?;
        Ok(SessionBoundarySequence::from_intervals(
            charger,
            now,
            horizon,
            &self.busy[charger.index()],
        ))
    }
}

/// Ground truth sampled per minute with each minute's state flipped
/// independently with a fixed probability. The flip for (charger, minute)
/// depends only on the seed, so forecasts do not depend on query order.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    pub truth: PerfectOracle,
    pub flip_probability: f64,
    pub seed: u64,
}

impl NoisyOracle {
    pub fn new(truth: PerfectOracle, flip_probability: f64, seed: u64) -> Self {
        Self {
            truth,
            flip_probability,
            seed,
        }
    }

    pub fn flipped(&self, charger: ChargerId, minute: i64) -> bool {
        keyed_unit(self.seed, charger.0 as u64, minute as u64) < self.flip_probability
    }

    pub fn minute_state(&self, charger: ChargerId, minute: i64) -> bool {
        self.truth.occupied_at(charger, minute as f64) ^ self.flipped(charger, minute)
    }
}

impl OccupancyPredictor for NoisyOracle {
    fn predict(
        &self,
        charger: ChargerId,
        now: f64,
        horizon: f64,
    ) -> Result<SessionBoundarySequence, OccupancyError> {
        check(self.truth.chargers(), charger, horizon)?;
        Ok(SessionBoundarySequence::from_minute_states(
            charger,
            now,
            horizon,
            |m| self.minute_state(charger, m),
        ))
    }
}

/// Day 0 of the shared clock (1970-01-01) was a Thursday.
pub fn is_weekend(day: i64) -> bool {
    (day + 3).rem_euclid(7) >= 5
}

/// Per charger, per day type (weekday / weekend), per minute of day: the
/// share of history days on which the charger was busy. A minute is
/// forecast busy when that share exceeds the threshold.
#[derive(Debug, Clone)]
pub struct HistoricalProfile {
    pub threshold: f64,
    /// `[charger][weekend as usize][minute of day]`
    frequency: Vec<[Vec<f64>; 2]>,
}

impl HistoricalProfile {
    /// Builds the profile from sessions observed on the given calendar days.
    pub fn from_sessions(
        chargers: usize,
        sessions: &[ChargingSessionRecord],
        days: &[i64],
        threshold: f64,
    ) -> Self {
        let minutes = MINUTES_PER_DAY as usize;
        let mut counts = vec![[vec![0u32; minutes], vec![0u32; minutes]]; chargers];
        let mut day_counts = [0u32; 2];
        for &d in days {
            day_counts[is_weekend(d) as usize] += 1;
        }
        for s in sessions {
            let Some(per_type) = counts.get_mut(s.charger.index()) else {
                continue;
            };
            let first = libm::ceil(s.start) as i64;
            let last = libm::ceil(s.end) as i64;
            for m in first..last {
                let day = m.div_euclid(minutes as i64);
                if !days.contains(&day) {
                    continue;
                }
                let minute = m.rem_euclid(minutes as i64) as usize;
                per_type[is_weekend(day) as usize][minute] += 1;
            }
        }
        let frequency = counts
            .into_iter()
            .map(|[wd, we]| {
                let norm = |c: Vec<u32>, n: u32| -> Vec<f64> {
                    c.into_iter()
                        .map(|x| if n == 0 { 0.0 } else { x as f64 / n as f64 })
                        .collect()
                };
                let weekday = norm(wd, day_counts[0]);
                let weekend = norm(we, day_counts[1]);
                // A day type with no history borrows the other one.
                match (day_counts[0], day_counts[1]) {
                    (0, _) => [weekend.clone(), weekend],
                    (_, 0) => [weekday.clone(), weekday],
                    _ => [weekday, weekend],
                }
            })
            .collect();
        Self {
            threshold,
            frequency,
        }
    }

    pub fn frequency(&self, charger: ChargerId, minute: i64) -> f64 {
        let minutes = MINUTES_PER_DAY as i64;
        let day = minute.div_euclid(minutes);
        self.frequency
            .get(charger.index())
            .map_or(0.0, |f| f[is_weekend(day) as usize][minute.rem_euclid(minutes) as usize])
    }

    pub fn minute_state(&self, charger: ChargerId, minute: i64) -> bool {
        self.frequency(charger, minute) > self.threshold
    }
}

impl OccupancyPredictor for HistoricalProfile {
    fn predict(
        &self,
        charger: ChargerId,
        now: f64,
        horizon: f64,
    ) -> Result<SessionBoundarySequence, OccupancyError> {
        check(self.frequency.len(), charger, horizon)?;
        Ok(SessionBoundarySequence::from_minute_states(
            charger,
            now,
            horizon,
            |m| self.minute_state(charger, m),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::arrival_window;

    fn rec(c: u32, start: f64, end: f64) -> ChargingSessionRecord {
        ChargingSessionRecord {
            charger: ChargerId(c),
            start,
            end,
            energy_kwh: None,
        }
    }

    #[test]
    fn always_free_forecast() {
        let p = AlwaysFree { chargers: 2 };
        let s = p.predict(ChargerId(1), 600.0, 60.0).unwrap();
        assert_eq!(s.boundaries, vec![600.0, 660.0]);
        assert_eq!(s.occupied, vec![false]);
        assert_eq!(
            p.predict(ChargerId(2), 600.0, 60.0),
            Err(OccupancyError::UnknownCharger(ChargerId(2)))
        );
    }

    #[test]
    fn perfect_oracle_transcribes() {
        let now = 600.0;
        let p = PerfectOracle::new(1, &[rec(0, now + 10.0, now + 25.0)]);
        let s = p.predict(ChargerId(0), now, 60.0).unwrap();
        assert_eq!(s.boundaries, vec![now, now + 10.0, now + 25.0, now + 60.0]);
        assert_eq!(s.occupied, vec![false, true, false]);
    }

    #[test]
    fn perfect_oracle_wait_is_true_residual() {
        let sessions = [
            rec(0, 400.0, 435.0),
            rec(0, 435.0, 470.0),
            rec(0, 520.5, 560.0),
            rec(0, 700.0, 745.0),
        ];
        let oracle = PerfectOracle::new(1, &sessions);
        for now in (380..800).step_by(7) {
            let now = now as f64;
            let seq = oracle.predict(ChargerId(0), now, 60.0).unwrap();
            for k in 0..60 {
                let t = now + k as f64;
                let w = arrival_window(&seq, t).unwrap();
                let residual = oracle
                    .intervals(ChargerId(0))
                    .iter()
                    .find(|&&(s, e)| s <= t && t < e)
                    .map_or(0.0, |&(_, e)| e.min(now + 60.0) - t);
                assert!((w.expected_wait(t) - residual).abs() < 1e-9, "now {now} t {t}");
            }
        }
    }

    #[test]
    fn noisy_oracle_is_order_independent() {
        let truth = PerfectOracle::new(2, &[rec(1, 100.0, 160.0)]);
        let noisy = NoisyOracle::new(truth, 0.3, 42);
        let a = noisy.predict(ChargerId(1), 90.0, 60.0).unwrap();
        let _ = noisy.predict(ChargerId(0), 90.0, 60.0).unwrap();
        let b = noisy.predict(ChargerId(1), 90.0, 60.0).unwrap();
        assert_eq!(a, b);
        let zero = NoisyOracle::new(noisy.truth.clone(), 0.0, 42);
        let s = zero.predict(ChargerId(1), 90.0, 60.0).unwrap();
        assert_eq!(s.boundaries, vec![90.0, 100.0, 150.0]);
        assert_eq!(s.occupied, vec![false, true]);
    }

    #[test]
    fn profile_thresholds_history() {
        // Three weekdays (Monday to Wednesday); the charger is busy
        // 10:30-11:00 on two of them and 10:00-10:30 on one.
        let days = [17665i64, 17666, 17667];
        let base = |d: i64| d as f64 * 1440.0;
        let sessions = [
            rec(0, base(days[0]) + 630.0, base(days[0]) + 660.0),
            rec(0, base(days[1]) + 630.0, base(days[1]) + 660.0),
            rec(0, base(days[2]) + 600.0, base(days[2]) + 630.0),
        ];
        let profile = HistoricalProfile::from_sessions(1, &sessions, &days, 0.5);
        let now = base(17672) + 600.0; // the following Monday, 10:00
        let s = profile.predict(ChargerId(0), now, 60.0).unwrap();
        assert_eq!(s.boundaries, vec![now, now + 30.0, now + 60.0]);
        assert_eq!(s.occupied, vec![false, true]);
        assert!((profile.frequency(ChargerId(0), (now + 45.0) as i64) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn weekday_lookup() {
        assert!(!is_weekend(0)); // Thursday
        assert!(is_weekend(2)); // Saturday
        assert!(is_weekend(3));
        assert!(!is_weekend(17665)); // Monday 2018-05-14
    }
}
