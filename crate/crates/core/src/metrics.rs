//! Fleet charging metrics, consumption profile extraction and policy
//! comparison deltas.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Policy;
use crate::sim::{ChargeVisitRecord, TraceKind, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean waiting minutes per charging session.
    pub acwt: f64,
    /// Mean charging minutes per session.
    pub act: f64,
    /// Mean access + waiting + charging minutes per session.
    pub aotc: f64,
    /// Fleet waiting hours.
    pub twt: f64,
    /// Fleet charging hours.
    pub tct: f64,
    /// Fleet energy charged, kWh.
    pub tce: f64,
    pub sessions: usize,
    pub served: usize,
    pub rejected: usize,
    pub plan_cost: f64,
}

/// One charging session reduced to the four quantities the metrics use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitTimes {
    pub access: f64,
    pub wait: f64,
    pub charge_minutes: f64,
    pub energy: f64,
}

impl From<&ChargeVisitRecord> for VisitTimes {
    fn from(v: &ChargeVisitRecord) -> Self {
        Self {
            access: v.access,
            wait: v.wait,
            charge_minutes: v.charge_minutes,
            energy: v.energy,
        }
    }
}

impl MetricsReport {
    pub fn from_times(visits: impl IntoIterator<Item = VisitTimes>, served: usize, rejected: usize, plan_cost: f64) -> Self {
        let mut r = MetricsReport {
            served,
            rejected,
            plan_cost,
            ..Self::default()
        };
        let mut wait = 0.0;
        let mut charge = 0.0;
        let mut total = 0.0;
        for v in visits {
            r.sessions += 1;
            wait += v.wait;
            charge += v.charge_minutes;
            total += v.access + v.wait + v.charge_minutes;
            r.tce += v.energy;
        }
        if r.sessions > 0 {
            let n = r.sessions as f64;
            r.acwt = wait / n;
            r.act = charge / n;
            r.aotc = total / n;
        }
        r.twt = wait / 60.0;
        r.tct = charge / 60.0;
        r
    }

    pub fn from_visits(visits: &[ChargeVisitRecord], served: usize, rejected: usize, plan_cost: f64) -> Self {
        Self::from_times(visits.iter().map(VisitTimes::from), served, rejected, plan_cost)
    }

    /// Recomputes the report from an exported trace alone.
    pub fn from_trace(rows: &[TraceRow], plan_cost: f64) -> Self {
        let visits = rows
            .iter()
            .filter(|r| r.kind == TraceKind::LeaveCharger && r.vehicle.is_some())
            .map(|r| VisitTimes {
                access: r.access.unwrap_or(0.0),
                wait: r.wait.unwrap_or(0.0),
                charge_minutes: r.charge_minutes.unwrap_or(0.0),
                energy: r.energy.unwrap_or(0.0),
            });
        let count = |k| rows.iter().filter(|r| r.kind == k).count();
        Self::from_times(
            visits,
            count(TraceKind::Dropoff),
            count(TraceKind::RequestRejected),
            plan_cost,
        )
    }

    /// Metric values in report order, with their short names.
    pub fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("ACWT", self.acwt),
            ("ACT", self.act),
            ("AOTC", self.aotc),
            ("TWT", self.twt),
            ("TCT", self.tct),
            ("TCE", self.tce),
            ("sessions", self.sessions as f64),
            ("served", self.served as f64),
            ("rejected", self.rejected as f64),
            ("plan_cost", self.plan_cost),
        ]
    }

    /// Arithmetic mean of each field; counts are rounded.
    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        if reports.is_empty() {
            return MetricsReport::default();
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg_count = |f: fn(&MetricsReport) -> usize| {
            libm::round(reports.iter().map(|r| f(r) as f64).sum::<f64>() / n) as usize
        };
        MetricsReport {
            acwt: avg(|r| r.acwt),
            act: avg(|r| r.act),
            aotc: avg(|r| r.aotc),
            twt: avg(|r| r.twt),
            tct: avg(|r| r.tct),
            tce: avg(|r| r.tce),
            sessions: avg_count(|r| r.sessions),
            served: avg_count(|r| r.served),
            rejected: avg_count(|r| r.rejected),
            plan_cost: avg(|r| r.plan_cost),
        }
    }
}

/// Relative change from `base` to `new` in percent, per metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub acwt: f64,
    pub act: f64,
    pub aotc: f64,
    pub twt: f64,
    pub tct: f64,
    pub tce: f64,
}

fn pct(new: f64, base: f64) -> f64 {
    if base == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(new)
        }
    } else {
        (new - base) / base * 100.0
    }
}

impl MetricDeltas {
    pub fn between(new: &MetricsReport, base: &MetricsReport) -> Self {
        Self {
            acwt: pct(new.acwt, base.acwt),
            act: pct(new.act, base.act),
            aotc: pct(new.aotc, base.aotc),
            twt: pct(new.twt, base.twt),
            tct: pct(new.tct, base.tct),
            tce: pct(new.tce, base.tce),
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("ACWT", self.acwt),
            ("ACT", self.act),
            ("AOTC", self.aotc),
            ("TWT", self.twt),
            ("TCT", self.tct),
            ("TCE", self.tce),
        ]
    }
}

/// The three comparison rows of a report: (label, new policy, base policy).
pub const DELTA_ROWS: [(&str, Policy, Policy); 3] = [
    ("OCP0 vs. NP", Policy::Planned, Policy::NeedBased),
    ("OCP* vs. NP", Policy::Predictive, Policy::NeedBased),
    ("OCP* vs. OCP0", Policy::Predictive, Policy::Planned),
];

/// Published reference values from a city-scale case study, for display only:
/// (policy, ACWT, ACT, AOTC, TWT, TCT, TCE).
pub const REFERENCE: [(Policy, [f64; 6]); 3] = [
    (Policy::NeedBased, [24.2, 43.4, 69.4, 35.7, 63.3, 3165.5]),
    (Policy::Planned, [20.0, 27.3, 49.1, 28.9, 39.5, 1976.9]),
    (Policy::Predictive, [12.2, 27.2, 41.6, 18.4, 41.0, 2048.9]),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("no consumption logs to average")]
    Empty,
    #[error("consumption logs disagree on fleet size or epoch count")]
    Shape,
}

/// Per-vehicle mean kWh consumed in each epoch over several runs.
/// `logs[run][vehicle][epoch]`.
pub fn mean_consumption(logs: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, ProfileError> {
    let first = logs.first().ok_or(ProfileError::Empty)?;
    let (n, h) = (first.len(), first.first().map_or(0, Vec::len));
    if logs
        .iter()
        .any(|l| l.len() != n || l.iter().any(|row| row.len() != h))
    {
        return Err(ProfileError::Shape);
    }
    let runs = logs.len() as f64;
    Ok((0..n)
        .map(|v| {
            (0..h)
                .map(|e| logs.iter().map(|l| l[v][e]).sum::<f64>() / runs)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(access: f64, wait: f64, charge: f64, energy: f64) -> VisitTimes {
        VisitTimes {
            access,
            wait,
            charge_minutes: charge,
            energy,
        }
    }

    #[test]
    fn aggregates() {
        let r = MetricsReport::from_times([t(5.0, 10.0, 30.0, 25.0), t(3.0, 0.0, 20.0, 16.0)], 7, 1, 2.5);
        assert_eq!(r.sessions, 2);
        assert_eq!(r.acwt, 5.0);
        assert_eq!(r.act, 25.0);
        assert_eq!(r.aotc, 34.0);
        assert!((r.twt - 10.0 / 60.0).abs() < 1e-12);
        assert!((r.tct - 50.0 / 60.0).abs() < 1e-12);
        assert_eq!(r.tce, 41.0);
        assert!(r.aotc >= r.act);
    }

    #[test]
    fn empty_is_zero() {
        let r = MetricsReport::from_times([], 0, 0, 0.0);
        assert_eq!(r, MetricsReport::default());
    }

    #[test]
    fn consumption_means() {
        let a = vec![vec![0.0, 0.0, 2.04]];
        let b = vec![vec![0.0, 0.0, 4.08]];
        let m = mean_consumption(&[a, b]).unwrap();
        assert!((m[0][2] - 3.06).abs() < 1e-12);
        assert_eq!(m[0][0], 0.0);
        assert_eq!(mean_consumption(&[]), Err(ProfileError::Empty));
        assert_eq!(
            mean_consumption(&[vec![vec![1.0]], vec![vec![1.0, 2.0]]]),
            Err(ProfileError::Shape)
        );
    }

    #[test]
    fn deltas() {
        let base = MetricsReport {
            acwt: 24.2,
            tce: 3165.5,
            ..MetricsReport::default()
        };
        let new = MetricsReport {
            acwt: 12.2,
            tce: 2048.9,
            ..MetricsReport::default()
        };
        let d = MetricDeltas::between(&new, &base);
        assert!((d.acwt - -49.586).abs() < 1e-3);
        assert!((d.tce - -35.27).abs() < 1e-2);
        assert_eq!(d.act, 0.0);
    }
}
