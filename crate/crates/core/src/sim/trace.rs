use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scenario::{ChargerId, RequestId, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RequestPlaced,
    RequestAssigned,
    RequestRejected,
    Pickup,
    Dropoff,
    EpochBoundary,
    ChargeAssigned,
    ChargePostponed,
    ChargeSkipped,
    EmergencyCharge,
    ArrivalAtCharger,
    LeaveCharger,
    ReserveViolation,
    ReturnToDepot,
    DayEnd,
}

impl TraceKind {
    pub const ALL: [TraceKind; 15] = [
        TraceKind::RequestPlaced,
        TraceKind::RequestAssigned,
        TraceKind::RequestRejected,
        TraceKind::Pickup,
        TraceKind::Dropoff,
        TraceKind::EpochBoundary,
        TraceKind::ChargeAssigned,
        TraceKind::ChargePostponed,
        TraceKind::ChargeSkipped,
        TraceKind::EmergencyCharge,
        TraceKind::ArrivalAtCharger,
        TraceKind::LeaveCharger,
        TraceKind::ReserveViolation,
        TraceKind::ReturnToDepot,
        TraceKind::DayEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::RequestPlaced => "request_placed",
            TraceKind::RequestAssigned => "request_assigned",
            TraceKind::RequestRejected => "request_rejected",
            TraceKind::Pickup => "pickup",
            TraceKind::Dropoff => "dropoff",
            TraceKind::EpochBoundary => "epoch_boundary",
            TraceKind::ChargeAssigned => "charge_assigned",
            TraceKind::ChargePostponed => "charge_postponed",
            TraceKind::ChargeSkipped => "charge_skipped",
            TraceKind::EmergencyCharge => "emergency_charge",
            TraceKind::ArrivalAtCharger => "arrival_at_charger",
            TraceKind::LeaveCharger => "leave_charger",
            TraceKind::ReserveViolation => "reserve_violation",
            TraceKind::ReturnToDepot => "return_to_depot",
            TraceKind::DayEnd => "day_end",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// One row of the event trace. Which optional fields are set depends on
/// the kind; `leave_charger` rows carry the full visit (`wait`,
/// `charge_minutes`, `energy`, `access`) and `day_end` rows the final `soc`
/// and `odometer` of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub kind: TraceKind,
    pub vehicle: Option<VehicleId>,
    pub charger: Option<ChargerId>,
    pub request: Option<RequestId>,
    pub exogenous: Option<u32>,
    pub soc: Option<f64>,
    pub odometer: Option<f64>,
    pub wait: Option<f64>,
    pub charge_minutes: Option<f64>,
    pub energy: Option<f64>,
    pub access: Option<f64>,
}

impl TraceRow {
    pub fn new(time: f64, kind: TraceKind) -> Self {
        Self {
            time,
            kind,
            vehicle: None,
            charger: None,
            request: None,
            exogenous: None,
            soc: None,
            odometer: None,
            wait: None,
            charge_minutes: None,
            energy: None,
            access: None,
        }
    }
}

/// FNV-1a over every field, bit-exact.
pub fn trace_hash(rows: &[TraceRow]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    let opt_u = |v: Option<u32>| v.map_or(u64::MAX, |x| x as u64);
    let opt_f = |v: Option<f64>| v.map_or(u64::MAX, f64::to_bits);
    for r in rows {
        eat(&r.time.to_bits().to_le_bytes());
        eat(&[r.kind as u8]);
        for v in [
            opt_u(r.vehicle.map(|v| v.0)),
            opt_u(r.charger.map(|c| c.0)),
            opt_u(r.request.map(|q| q.0)),
            opt_u(r.exogenous),
            opt_f(r.soc),
            opt_f(r.odometer),
            opt_f(r.wait),
            opt_f(r.charge_minutes),
            opt_f(r.energy),
            opt_f(r.access),
        ] {
            eat(&v.to_le_bytes());
        }
    }
    h
}

/// A plugged-in interval on a charger, read back from the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargerInterval {
    pub charger: ChargerId,
    pub start: f64,
    pub end: f64,
    pub vehicle: Option<VehicleId>,
    pub exogenous: Option<u32>,
}

pub fn charger_intervals(rows: &[TraceRow]) -> Vec<ChargerInterval> {
    rows.iter()
        .filter(|r| r.kind == TraceKind::LeaveCharger)
        .filter_map(|r| {
            Some(ChargerInterval {
                charger: r.charger?,
                start: r.time - r.charge_minutes?,
                end: r.time,
                vehicle: r.vehicle,
                exogenous: r.exogenous,
            })
        })
        .collect()
}

/// Pairs of intervals that share a charger and overlap in time.
pub fn exclusivity_violations(rows: &[TraceRow]) -> Vec<(ChargerInterval, ChargerInterval)> {
    let mut iv = charger_intervals(rows);
    iv.sort_by(|a, b| a.charger.cmp(&b.charger).then(a.start.total_cmp(&b.start)));
    let mut out = Vec::new();
    for w in iv.windows(2) {
        if w[0].charger == w[1].charger && w[1].start < w[0].end - 1e-9 {
            out.push((w[0], w[1]));
        }
    }
    out
}

/// Per vehicle: `(e_init - e_final) - (consumption - charged)`, which is
/// zero when energy is conserved. `e_init` is indexed by vehicle.
pub fn energy_residuals(rows: &[TraceRow], e_init: &[f64], consumption_rate: f64) -> Vec<f64> {
    let mut charged = alloc::vec![0.0; e_init.len()];
    let mut last: Vec<Option<(f64, f64)>> = alloc::vec![None; e_init.len()];
    for r in rows {
        let Some(v) = r.vehicle else { continue };
        let Some(slot) = charged.get_mut(v.index()) else {
            continue;
        };
        match r.kind {
            TraceKind::LeaveCharger => *slot += r.energy.unwrap_or(0.0),
            TraceKind::DayEnd => {
                last[v.index()] = r.soc.zip(r.odometer);
            }
            _ => {}
        }
    }
    e_init
        .iter()
        .enumerate()
        .map(|(i, &e0)| match last[i] {
            Some((soc, odo)) => (e0 - soc) - (consumption_rate * odo - charged[i]),
            None => f64::NAN,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn leave(c: u32, t: f64, minutes: f64) -> TraceRow {
        TraceRow {
            charger: Some(ChargerId(c)),
            charge_minutes: Some(minutes),
            vehicle: Some(VehicleId(0)),
            energy: Some(minutes),
            ..TraceRow::new(t, TraceKind::LeaveCharger)
        }
    }

    #[test]
    fn overlap_found() {
        let rows = vec![leave(0, 50.0, 20.0), leave(0, 60.0, 20.0), leave(1, 55.0, 30.0)];
        assert_eq!(exclusivity_violations(&rows).len(), 1);
        let rows = vec![leave(0, 50.0, 20.0), leave(0, 70.0, 20.0)];
        assert!(exclusivity_violations(&rows).is_empty());
    }

    #[test]
    fn hash_sees_every_field() {
        let rows = vec![leave(0, 50.0, 20.0)];
        let mut other = rows.clone();
        other[0].access = Some(0.0);
        assert_ne!(trace_hash(&rows), trace_hash(&other));
        assert_eq!(trace_hash(&rows), trace_hash(&rows.clone()));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in TraceKind::ALL {
            assert_eq!(TraceKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn energy_balance() {
        let end = TraceRow {
            vehicle: Some(VehicleId(0)),
            soc: Some(50.0),
            odometer: Some(100.0),
            ..TraceRow::new(100.0, TraceKind::DayEnd)
        };
        // 62 - 50 = 0.2 * 100 - 8
        let mut charge = leave(0, 50.0, 20.0);
        charge.energy = Some(8.0);
        let r = energy_residuals(&[charge, end], &[62.0], 0.2);
        assert!(r[0].abs() < 1e-12);
    }
}
