use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::OccupancyError;
use crate::scenario::ChargerId;

/// Forecast of one charger over `[first boundary, last boundary]`, cut into
/// half-open slots `[g_r, g_{r+1})` that are either free or occupied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionBoundarySequence {
    pub charger: ChargerId,
    pub boundaries: Vec<f64>,
    pub occupied: Vec<bool>,
}

impl SessionBoundarySequence {
    /// Sequence whose occupied slots are the union of `intervals` clipped to
    /// the horizon. Touching intervals form one occupied slot.
    pub fn from_intervals(
        charger: ChargerId,
        now: f64,
        horizon: f64,
        intervals: &[(f64, f64)],
    ) -> Self {
        let end = now + horizon;
        let mut clipped: Vec<(f64, f64)> = intervals
            .iter()
            .map(|&(s, e)| (s.max(now), e.min(end)))
            .filter(|(s, e)| e > s)
            .collect();
        clipped.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(clipped.len());
        for (s, e) in clipped {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        let mut seq = Self {
            charger,
            boundaries: alloc::vec![now],
            occupied: Vec::new(),
        };
        let mut cursor = now;
        for (s, e) in merged {
            if s > cursor {
                seq.push_slot(s, false);
            }
            seq.push_slot(e, true);
            cursor = e;
        }
        if cursor < end {
            seq.push_slot(end, false);
        }
        seq
    }

    /// Sequence built from per-minute states, minute `m` covering `[m, m+1)`.
    /// Runs of equal state form one slot.
    pub fn from_minute_states(
        charger: ChargerId,
        now: f64,
        horizon: f64,
        mut state: impl FnMut(i64) -> bool,
    ) -> Self {
        let end = now + horizon;
        let mut seq = Self {
            charger,
            boundaries: alloc::vec![now],
            occupied: Vec::new(),
        };
        let mut m = libm::floor(now) as i64;
        let mut current: Option<bool> = None;
        while (m as f64) < end {
            let s = state(m);
            let slot_start = (m as f64).max(now);
            if let Some(c) = current {
                if c != s {
                    seq.push_slot(slot_start, c);
                }
            }
            current = Some(s);
            m += 1;
        }
        if let Some(c) = current {
            seq.push_slot(end, c);
        }
        seq
    }

    fn push_slot(&mut self, end: f64, occupied: bool) {
        self.boundaries.push(end);
        self.occupied.push(occupied);
    }

    pub fn horizon_start(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn horizon_end(&self) -> f64 {
        *self.boundaries.last().unwrap_or(&self.boundaries[0])
    }

    pub fn slots(&self) -> usize {
        self.occupied.len()
    }

    /// Forecast state at instant `t`; free outside the horizon.
    pub fn occupied_at(&self, t: f64) -> bool {
        if self.occupied.is_empty() || t < self.horizon_start() || t >= self.horizon_end() {
            return false;
        }
        let r = self.boundaries.partition_point(|&g| g <= t) - 1;
        self.occupied[r]
    }

    pub fn is_well_formed(&self) -> bool {
        self.boundaries.len() == self.occupied.len() + 1
            && self.boundaries.windows(2).all(|w| w[0] < w[1])
    }
}

/// Forecast slot bounds seen by a vehicle arriving at a charger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalWindow {
    /// Start of the occupied slot, or the horizon end when free.
    pub start: f64,
    /// End of the occupied slot, or the horizon end when free.
    pub end: f64,
    pub occupied_on_arrival: bool,
}

impl ArrivalWindow {
    pub fn free(horizon_end: f64) -> Self {
        Self {
            start: horizon_end,
            end: horizon_end,
            occupied_on_arrival: false,
        }
    }

    /// Expected wait for an arrival at `arrival`.
    pub fn expected_wait(&self, arrival: f64) -> f64 {
        if self.occupied_on_arrival {
            (self.end - arrival).max(0.0)
        } else {
            0.0
        }
    }

    /// Same window expressed relative to `origin`.
    pub fn shifted(&self, origin: f64) -> Self {
        Self {
            start: self.start - origin,
            end: self.end - origin,
            occupied_on_arrival: self.occupied_on_arrival,
        }
    }
}

/// Locates the slot containing `arrival`. An occupied slot yields its bounds;
/// a free slot yields the horizon end for both. Slots are half-open, so an
/// arrival exactly on a boundary belongs to the later slot. Arrivals before
/// the horizon are moved to its start and arrivals at or beyond its end see
/// a free charger.
pub fn arrival_window(
    seq: &SessionBoundarySequence,
    arrival: f64,
) -> Result<ArrivalWindow, OccupancyError> {
    if seq.occupied.is_empty() || seq.boundaries.len() != seq.occupied.len() + 1 {
        return Err(OccupancyError::EmptySequence);
    }
    let end = seq.horizon_end();
    let t = arrival.max(seq.horizon_start());
    if t >= end {
        return Ok(ArrivalWindow::free(end));
    }
    let r = seq.boundaries.partition_point(|&g| g <= t) - 1;
    if seq.occupied[r] {
        Ok(ArrivalWindow {
            start: seq.boundaries[r],
            end: seq.boundaries[r + 1],
            occupied_on_arrival: true,
        })
    } else {
        Ok(ArrivalWindow::free(end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq(boundaries: Vec<f64>, occupied: Vec<bool>) -> SessionBoundarySequence {
        SessionBoundarySequence {
            charger: ChargerId(0),
            boundaries,
            occupied,
        }
    }

    #[test]
    fn free_charger_maps_to_horizon_end() {
        let s = SessionBoundarySequence::from_intervals(ChargerId(0), 100.0, 60.0, &[]);
        assert_eq!(s.boundaries, vec![100.0, 160.0]);
        assert_eq!(s.occupied, vec![false]);
        for t in [100.0, 120.0, 159.9] {
            assert_eq!(arrival_window(&s, t).unwrap(), ArrivalWindow::free(160.0));
        }
    }

    #[test]
    fn occupied_slot_bounds() {
        let s = seq(vec![0.0, 20.0, 40.0, 55.0, 60.0], vec![false, false, true, false]);
        let w = arrival_window(&s, 45.0).unwrap();
        assert_eq!(
            w,
            ArrivalWindow {
                start: 40.0,
                end: 55.0,
                occupied_on_arrival: true
            }
        );
        assert_eq!(w.expected_wait(45.0), 10.0);
    }

    #[test]
    fn boundary_arrival_takes_later_slot() {
        let s = seq(vec![0.0, 40.0, 55.0, 60.0], vec![false, true, false]);
        assert!(arrival_window(&s, 40.0).unwrap().occupied_on_arrival);
        assert!(!arrival_window(&s, 55.0).unwrap().occupied_on_arrival);
        assert!(!arrival_window(&s, 39.999).unwrap().occupied_on_arrival);
    }

    #[test]
    fn arrivals_past_horizon_are_free() {
        let s = seq(vec![0.0, 30.0, 60.0], vec![true, true]);
        assert_eq!(arrival_window(&s, 75.0).unwrap(), ArrivalWindow::free(60.0));
        assert_eq!(arrival_window(&s, 60.0).unwrap(), ArrivalWindow::free(60.0));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let s = seq(vec![0.0], vec![]);
        assert_eq!(arrival_window(&s, 1.0), Err(OccupancyError::EmptySequence));
    }

    #[test]
    fn transcribes_one_session() {
        let now = 500.0;
        let s = SessionBoundarySequence::from_intervals(
            ChargerId(3),
            now,
            60.0,
            &[(now + 10.0, now + 25.0)],
        );
        assert_eq!(s.boundaries, vec![now, now + 10.0, now + 25.0, now + 60.0]);
        assert_eq!(s.occupied, vec![false, true, false]);
    }

    #[test]
    fn touching_sessions_form_one_slot() {
        let s = SessionBoundarySequence::from_intervals(
            ChargerId(0),
            0.0,
            60.0,
            &[(10.0, 25.0), (25.0, 40.0), (-5.0, 3.0)],
        );
        assert_eq!(s.boundaries, vec![0.0, 3.0, 10.0, 40.0, 60.0]);
        assert_eq!(s.occupied, vec![true, false, true, false]);
        assert!(s.is_well_formed());
    }

    #[test]
    fn minute_states_collapse_into_runs() {
        let s = SessionBoundarySequence::from_minute_states(ChargerId(0), 10.0, 6.0, |m| {
            (12..14).contains(&m)
        });
        assert_eq!(s.boundaries, vec![10.0, 12.0, 14.0, 16.0]);
        assert_eq!(s.occupied, vec![false, true, false]);
    }
}
