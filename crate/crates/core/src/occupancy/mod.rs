//! Public charger occupancy: session records, per-minute occupancy series,
//! forecast backends and the arrival windows fed to the assignment model.
//!
//! Times are minutes on one shared clock. For ingested data that clock
//! starts at 1970-01-01 00:00 local time, so `floor(t / 1440)` is a calendar
//! day; inside the simulator it is minutes after midnight of the simulated
//! day.

mod predictor;
mod window;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::ChargerId;

pub use predictor::{
    is_weekend, AlwaysFree, HistoricalProfile, NoisyOracle, OccupancyPredictor, PerfectOracle,
};
pub use window::{arrival_window, ArrivalWindow, SessionBoundarySequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("unknown charger {0}")]
    UnknownCharger(ChargerId),
    #[error("boundary sequence has no slots")]
    EmptySequence,
    #[error("forecast horizon must be positive")]
    InvalidHorizon,
    #[error("series lengths differ: {predicted} predicted vs {actual} observed")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("cannot score an empty series")]
    EmptySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingSessionRecord {
    pub charger: ChargerId,
    pub start: f64,
    pub end: f64,
    pub energy_kwh: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    MissingField,
    BadTimestamp,
    BadNumber,
    EndNotAfterStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based data row number.
    pub row: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub accepted: usize,
    /// Input sessions absorbed into an overlapping neighbour.
    pub merged: usize,
    pub rejected: Vec<RejectedRow>,
}

/// Collects raw session rows and normalises them: one sorted,
/// non-overlapping list per charger, overlaps unioned.
#[derive(Debug, Default)]
pub struct SessionIngest {
    rows: Vec<ChargingSessionRecord>,
    report: IngestReport,
}

impl SessionIngest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: usize, record: ChargingSessionRecord) {
        self.report.rows += 1;
        if !(record.end > record.start) {
            self.report.rejected.push(RejectedRow {
                row,
                reason: RejectReason::EndNotAfterStart,
            });
            return;
        }
        self.rows.push(record);
    }

    pub fn reject(&mut self, row: usize, reason: RejectReason) {
        self.report.rows += 1;
        self.report.rejected.push(RejectedRow { row, reason });
    }

    pub fn finish(mut self) -> (Vec<ChargingSessionRecord>, IngestReport) {
        self.report.accepted = self.rows.len();
        let (records, merged) = normalize_sessions(self.rows);
        self.report.merged = merged;
        (records, self.report)
    }
}

/// Sorts sessions by charger then start and unions overlapping sessions on
/// the same charger. Returns the records and how many inputs were absorbed.
pub fn normalize_sessions(
    mut rows: Vec<ChargingSessionRecord>,
) -> (Vec<ChargingSessionRecord>, usize) {
    rows.sort_by(|a, b| {
        a.charger
            .cmp(&b.charger)
            .then(a.start.total_cmp(&b.start))
            .then(a.end.total_cmp(&b.end))
    });
    let mut out: Vec<ChargingSessionRecord> = Vec::with_capacity(rows.len());
    let mut merged = 0;
    for r in rows {
        match out.last_mut() {
            Some(last) if last.charger == r.charger && r.start < last.end => {
                last.end = last.end.max(r.end);
                last.energy_kwh = match (last.energy_kwh, r.energy_kwh) {
                    (Some(a), Some(b)) => Some(a + b),
                    (a, b) => a.or(b),
                };
                merged += 1;
            }
            _ => out.push(r),
        }
    }
    (out, merged)
}

/// Per-minute occupancy of one charger for minutes `from..from + len`.
/// Minute `m` is occupied when some session covers the instant `m`.
pub fn occupancy_series(
    records: &[ChargingSessionRecord],
    charger: ChargerId,
    from: i64,
    len: usize,
) -> Vec<bool> {
    let mut series = alloc::vec![false; len];
    for r in records.iter().filter(|r| r.charger == charger) {
        let first = libm::ceil(r.start) as i64;
        let last = libm::ceil(r.end) as i64; // exclusive
        let lo = first.max(from);
        let hi = last.min(from + len as i64);
        for m in lo..hi {
            series[(m - from) as usize] = true;
        }
    }
    series
}

/// Inverse of [`occupancy_series`]: each run of occupied minutes becomes one
/// session.
pub fn series_to_sessions(
    charger: ChargerId,
    from: i64,
    series: &[bool],
) -> Vec<ChargingSessionRecord> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &busy) in series.iter().chain(core::iter::once(&false)).enumerate() {
        match (busy, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                out.push(ChargingSessionRecord {
                    charger,
                    start: (from + s as i64) as f64,
                    end: (from + i as i64) as f64,
                    energy_kwh: None,
                });
                run_start = None;
            }
            _ => {}
        }
    }
    out
}

/// Share of minutes where the predicted occupancy matches the observed one.
pub fn predictor_accuracy(predicted: &[bool], actual: &[bool]) -> Result<f64, OccupancyError> {
    if predicted.len() != actual.len() {
        return Err(OccupancyError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(OccupancyError::EmptySeries);
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(c: u32, start: f64, end: f64) -> ChargingSessionRecord {
        ChargingSessionRecord {
            charger: ChargerId(c),
            start,
            end,
            energy_kwh: None,
        }
    }

    #[test]
    fn disjoint_sessions_are_sorted() {
        let mut ingest = SessionIngest::new();
        ingest.push(1, rec(0, 700.0, 760.0));
        ingest.push(2, rec(0, 600.0, 650.0));
        let (records, report) = ingest.finish();
        assert_eq!(records, vec![rec(0, 600.0, 650.0), rec(0, 700.0, 760.0)]);
        assert_eq!(report.merged, 0);
        assert_eq!(report.accepted, 2);
    }

    #[test]
    fn overlapping_sessions_merge() {
        let mut ingest = SessionIngest::new();
        ingest.push(1, rec(4, 600.0, 660.0));
        ingest.push(2, rec(4, 630.0, 690.0));
        let (records, report) = ingest.finish();
        assert_eq!(records, vec![rec(4, 600.0, 690.0)]);
        assert_eq!(report.merged, 1);
    }

    #[test]
    fn reversed_session_rejected() {
        let mut ingest = SessionIngest::new();
        ingest.push(7, rec(0, 660.0, 600.0));
        let (records, report) = ingest.finish();
        assert!(records.is_empty());
        assert_eq!(
            report.rejected,
            vec![RejectedRow {
                row: 7,
                reason: RejectReason::EndNotAfterStart
            }]
        );
    }

    #[test]
    fn series_round_trip_is_idempotent() {
        let records = vec![rec(1, 5.0, 12.0), rec(1, 20.5, 30.0), rec(2, 0.0, 3.0)];
        let s1 = occupancy_series(&records, ChargerId(1), 0, 40);
        let rebuilt = series_to_sessions(ChargerId(1), 0, &s1);
        let (renorm, _) = normalize_sessions(rebuilt);
        let s2 = occupancy_series(&renorm, ChargerId(1), 0, 40);
        assert_eq!(s1, s2);
        assert!(s1[5] && s1[11] && !s1[12] && !s1[20] && s1[21] && s1[29] && !s1[30]);
    }

    #[test]
    fn accuracy_scores() {
        let a = vec![true, false, true, true];
        assert_eq!(predictor_accuracy(&a, &a), Ok(1.0));
        let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(predictor_accuracy(&a, &flipped), Ok(0.0));

        let truth = vec![false; 60];
        let mut pred = truth.clone();
        for p in pred.iter_mut().take(11) {
            *p = true;
        }
        let acc = predictor_accuracy(&pred, &truth).unwrap();
        assert!((acc - 49.0 / 60.0).abs() < 1e-12);
        assert!((acc - 0.8167).abs() < 1e-4);

        assert!(matches!(
            predictor_accuracy(&a, &a[..3]),
            Err(OccupancyError::LengthMismatch { .. })
        ));
    }
}
