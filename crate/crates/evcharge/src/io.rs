//! Delimited-text file formats.
//!
//! Every file has a header row. Times inside a simulated day are minutes
//! after midnight; charging session files use ISO-8601 local timestamps.
//! Column layouts are listed in the README.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use evcharge_core::assignment::{AssignmentInstance, AssignmentSolution, Optimality};
use evcharge_core::day_ahead::ChargingPlan;
use evcharge_core::demand::{ExogenousSession, RideRequest};
use evcharge_core::matrix::Matrix;
use evcharge_core::occupancy::{
    ArrivalWindow, ChargingSessionRecord, IngestReport, RejectReason, SessionIngest,
};
use evcharge_core::scenario::MINUTES_PER_DAY;
use evcharge_core::sim::{ChargeVisitRecord, TraceRow};
use evcharge_core::{ChargerId, Point, PriceSchedule, RequestId, VehicleId};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Content(String),
}

type Result<T> = std::result::Result<T, FormatError>;

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Content(msg.into())
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: DeserializeOwned>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Into::into)
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestRow {
    request_id: u32,
    arrival: f64,
    desired_pickup: f64,
    pickup_x: f64,
    pickup_y: f64,
    dropoff_x: f64,
    dropoff_y: f64,
    party_size: u32,
}

pub fn write_requests<W: Write>(w: W, requests: &[RideRequest]) -> Result<()> {
    write_rows(
        w,
        requests.iter().map(|r| RequestRow {
            request_id: r.id.0,
            arrival: r.arrival,
            desired_pickup: r.desired_pickup,
            pickup_x: r.pickup.x,
            pickup_y: r.pickup.y,
            dropoff_x: r.dropoff.x,
            dropoff_y: r.dropoff.y,
            party_size: r.party_size,
        }),
    )
}

pub fn read_requests<R: Read>(r: R) -> Result<Vec<RideRequest>> {
    let rows: Vec<RequestRow> = read_rows(r)?;
    Ok(rows
        .into_iter()
        .map(|r| RideRequest {
            id: RequestId(r.request_id),
            arrival: r.arrival,
            desired_pickup: r.desired_pickup,
            pickup: Point::new(r.pickup_x, r.pickup_y),
            dropoff: Point::new(r.dropoff_x, r.dropoff_y),
            party_size: r.party_size,
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct ExogenousRow {
    session_id: u32,
    charger_id: u32,
    arrival: f64,
    duration: f64,
}

pub fn write_exogenous<W: Write>(w: W, sessions: &[ExogenousSession]) -> Result<()> {
    write_rows(
        w,
        sessions.iter().map(|s| ExogenousRow {
            session_id: s.id,
            charger_id: s.charger.0,
            arrival: s.arrival,
            duration: s.duration,
        }),
    )
}

pub fn read_exogenous<R: Read>(r: R) -> Result<Vec<ExogenousSession>> {
    let rows: Vec<ExogenousRow> = read_rows(r)?;
    Ok(rows
        .into_iter()
        .map(|r| ExogenousSession {
            id: r.session_id,
            charger: ChargerId(r.charger_id),
            arrival: r.arrival,
            duration: r.duration,
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct PlanRow {
    vehicle_id: u32,
    epoch: usize,
    y: u8,
    u_kWh: f64,
    e_kWh: f64,
}

/// One row per vehicle and epoch with the start-of-epoch level `e`, plus a
/// closing row at epoch `h + 1` holding the end-of-day level.
pub fn write_plans<W: Write>(w: W, plans: &[ChargingPlan]) -> Result<()> {
    let rows = plans.iter().flat_map(|p| {
        (0..=p.epochs()).map(move |h| PlanRow {
            vehicle_id: p.vehicle.0,
            epoch: h + 1,
            y: p.charge.get(h).copied().unwrap_or(false) as u8,
            u_kWh: p.amount.get(h).copied().unwrap_or(0.0),
            e_kWh: p.soc[h],
        })
    });
    write_rows(w, rows)
}

/// Reads plans back; costs are recomputed from `prices`.
pub fn read_plans<R: Read>(r: R, prices: &PriceSchedule) -> Result<Vec<ChargingPlan>> {
    let rows: Vec<PlanRow> = read_rows(r)?;
    let mut plans: Vec<ChargingPlan> = Vec::new();
    for row in rows {
        if plans.last().map_or(true, |p| p.vehicle.0 != row.vehicle_id) {
            plans.push(ChargingPlan {
                vehicle: VehicleId(row.vehicle_id),
                charge: Vec::new(),
                amount: Vec::new(),
                soc: Vec::new(),
                cost: 0.0,
            });
        }
        let p = plans.last_mut().expect("just pushed");
        if row.epoch != p.soc.len() + 1 {
            return Err(bad(format!(
                "plan for vehicle {}: expected epoch {}, found {}",
                row.vehicle_id,
                p.soc.len() + 1,
                row.epoch
            )));
        }
        p.soc.push(row.e_kWh);
        if row.epoch <= prices.epochs() {
            p.charge.push(row.y != 0);
            p.amount.push(row.u_kWh);
        }
    }
    for p in &mut plans {
        if p.soc.len() != prices.epochs() + 1 {
            return Err(bad(format!(
                "plan for vehicle {} covers {} epochs, prices cover {}",
                p.vehicle.0,
                p.soc.len().saturating_sub(1),
                prices.epochs()
            )));
        }
        p.cost = p
            .amount
            .iter()
            .zip(&p.charge)
            .zip(&prices.energy)
            .map(|((&u, &y), &price)| price * u + if y { prices.fixed_cost } else { 0.0 })
            .sum();
    }
    Ok(plans)
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ConsumptionRow {
    vehicle_id: u32,
    epoch: usize,
    d_kWh: f64,
}

/// Per-vehicle, per-epoch kWh table (consumption logs and profiles).
pub fn write_consumption<W: Write>(w: W, table: &[Vec<f64>]) -> Result<()> {
    let rows = table.iter().enumerate().flat_map(|(v, row)| {
        row.iter().enumerate().map(move |(h, &d)| ConsumptionRow {
            vehicle_id: v as u32,
            epoch: h + 1,
            d_kWh: d,
        })
    });
    write_rows(w, rows)
}

pub fn read_consumption<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<ConsumptionRow> = read_rows(r)?;
    let mut table: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let v = row.vehicle_id as usize;
        if v == table.len() {
            table.push(Vec::new());
        }
        if v + 1 != table.len() {
            return Err(bad("consumption rows must be grouped by vehicle in id order"));
        }
        let line = &mut table[v];
        if row.epoch != line.len() + 1 {
            return Err(bad(format!("vehicle {v}: epochs must run 1, 2, ... in order")));
        }
        line.push(row.d_kWh);
    }
    Ok(table)
}

/// Minutes since 1970-01-01 00:00 of a local timestamp.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    let formats = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];
    let t = formats
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())?;
    let origin = NaiveDate::from_ymd_opt(1970, 1, 1)?.and_hms_opt(0, 0, 0)?;
    Some((t - origin).num_seconds() as f64 / 60.0)
}

pub fn format_timestamp(minutes: f64) -> String {
    let origin = NaiveDate::from_ymd_opt(1970, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid origin");
    let t = origin + chrono::Duration::seconds((minutes * 60.0).round() as i64);
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct SessionRow {
    charger_id: String,
    start: String,
    end: String,
    #[serde(default)]
    energy_kWh: Option<String>,
}

/// Reads a charging session file. Rows that cannot be used are reported,
/// not fatal; overlapping sessions on one charger are merged.
pub fn read_sessions<R: Read>(r: R) -> Result<(Vec<ChargingSessionRecord>, IngestReport)> {
    let mut ingest = SessionIngest::new();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    for (k, row) in reader.deserialize::<SessionRow>().enumerate() {
        let n = k + 1;
        let Ok(row) = row else {
            ingest.reject(n, RejectReason::MissingField);
            continue;
        };
        let Ok(charger) = row.charger_id.trim().parse::<u32>() else {
            ingest.reject(n, RejectReason::BadNumber);
            continue;
        };
        let (Some(start), Some(end)) = (parse_timestamp(&row.start), parse_timestamp(&row.end)) else {
            ingest.reject(n, RejectReason::BadTimestamp);
            continue;
        };
        let energy = match row.energy_kWh.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(e) => match e.parse::<f64>() {
                Ok(x) if x >= 0.0 => Some(x),
                _ => {
                    ingest.reject(n, RejectReason::BadNumber);
                    continue;
                }
            },
        };
        ingest.push(
            n,
            ChargingSessionRecord {
                charger: ChargerId(charger),
                start,
                end,
                energy_kwh: energy,
            },
        );
    }
    Ok(ingest.finish())
}

/// Writes sessions on the shared clock; `day` shifts day-relative times.
pub fn write_sessions<W: Write>(w: W, records: &[ChargingSessionRecord], day: i64) -> Result<()> {
    let offset = day as f64 * MINUTES_PER_DAY;
    write_rows(
        w,
        records.iter().map(|s| SessionRow {
            charger_id: s.charger.0.to_string(),
            start: format_timestamp(s.start + offset),
            end: format_timestamp(s.end + offset),
            energy_kWh: s.energy_kwh.map(|e| e.to_string()),
        }),
    )
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    read_rows(r)
}

pub fn write_visits<W: Write>(w: W, visits: &[ChargeVisitRecord]) -> Result<()> {
    write_rows(w, visits)
}

/// A row of the long-format metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub policy: String,
    pub metric: String,
    pub seed: u64,
    pub value: f64,
}

pub fn write_metrics_long<W: Write>(w: W, rows: &[MetricRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_metrics_long<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    read_rows(r)
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct InstanceRow {
    vehicle_id: u32,
    charger_id: u32,
    travel_min: f64,
    distance_km: f64,
    soc_kWh: f64,
    target_kWh: f64,
    rate_kWh_per_min: f64,
    window_start: f64,
    window_end: f64,
    occupied_on_arrival: u8,
    consumption_rate: f64,
    theta1: f64,
    theta2: f64,
    big_m1: f64,
    big_m2: f64,
    e_min: f64,
}

/// One row per (vehicle, charger) pair, vehicle-major; model constants are
/// repeated on every row.
pub fn write_instance<W: Write>(w: W, inst: &AssignmentInstance) -> Result<()> {
    let (n, m) = (inst.vehicle_count(), inst.charger_count());
    let rows = (0..n).flat_map(|i| {
        (0..m).map(move |j| {
            let win = inst.windows[(i, j)];
            InstanceRow {
                vehicle_id: inst.vehicles[i].0,
                charger_id: inst.chargers[j].0,
                travel_min: inst.travel_min[(i, j)],
                distance_km: inst.distance_km[(i, j)],
                soc_kWh: inst.soc[i],
                target_kWh: inst.target[i],
                rate_kWh_per_min: inst.rates[j],
                window_start: win.start,
                window_end: win.end,
                occupied_on_arrival: win.occupied_on_arrival as u8,
                consumption_rate: inst.consumption_rate,
                theta1: inst.theta1,
                theta2: inst.theta2,
                big_m1: inst.big_m1,
                big_m2: inst.big_m2,
                e_min: inst.e_min,
            }
        })
    });
    write_rows(w, rows)
}

fn grid_shape(pairs: &[(u32, u32)]) -> Result<(Vec<u32>, Vec<u32>)> {
    let mut vehicles: Vec<u32> = Vec::new();
    let mut chargers: Vec<u32> = Vec::new();
    for &(v, c) in pairs {
        if vehicles.last() != Some(&v) {
            vehicles.push(v);
        }
        if vehicles.len() == 1 {
            chargers.push(c);
        }
    }
    let complete = pairs.len() == vehicles.len() * chargers.len()
        && pairs
            .iter()
            .enumerate()
            .all(|(k, &(v, c))| v == vehicles[k / chargers.len().max(1)] && c == chargers[k % chargers.len().max(1)]);
    if !complete {
        return Err(bad("rows must list every (vehicle, charger) pair, vehicle-major"));
    }
    Ok((vehicles, chargers))
}

pub fn read_instance<R: Read>(r: R) -> Result<AssignmentInstance> {
    let rows: Vec<InstanceRow> = read_rows(r)?;
    let pairs: Vec<(u32, u32)> = rows.iter().map(|r| (r.vehicle_id, r.charger_id)).collect();
    let (vehicles, chargers) = grid_shape(&pairs)?;
    let (n, m) = (vehicles.len(), chargers.len());
    let at = |i: usize, j: usize| &rows[i * m + j];
    let first = rows.first();
    let constant = |f: fn(&InstanceRow) -> f64| first.map_or(0.0, f);
    let inst = AssignmentInstance {
        vehicles: vehicles.into_iter().map(VehicleId).collect(),
        chargers: chargers.into_iter().map(ChargerId).collect(),
        travel_min: Matrix::from_fn(n, m, |i, j| at(i, j).travel_min),
        distance_km: Matrix::from_fn(n, m, |i, j| at(i, j).distance_km),
        soc: (0..n).map(|i| at(i, 0).soc_kWh).collect(),
        target: (0..n).map(|i| at(i, 0).target_kWh).collect(),
        windows: Matrix::from_fn(n, m, |i, j| ArrivalWindow {
            start: at(i, j).window_start,
            end: at(i, j).window_end,
            occupied_on_arrival: at(i, j).occupied_on_arrival != 0,
        }),
        rates: (0..m).map(|j| at(0, j).rate_kWh_per_min).collect(),
        consumption_rate: constant(|r| r.consumption_rate),
        theta1: constant(|r| r.theta1),
        theta2: constant(|r| r.theta2),
        big_m1: constant(|r| r.big_m1),
        big_m2: constant(|r| r.big_m2),
        e_min: constant(|r| r.e_min),
    };
    inst.validate().map_err(|e| bad(e.to_string()))?;
    Ok(inst)
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct SolutionRow {
    vehicle_id: u32,
    charger_id: u32,
    x: u8,
    energy_kWh: f64,
    wait_min: f64,
    /// Per charger; repeated on each of its rows.
    charger_occupied_start: u8,
    /// Whole-solution objective; repeated on every row.
    objective: f64,
}

pub fn write_solution<W: Write>(w: W, inst: &AssignmentInstance, sol: &AssignmentSolution) -> Result<()> {
    let (n, m) = (inst.vehicle_count(), inst.charger_count());
    let rows = (0..n).flat_map(|i| {
        (0..m).map(move |j| SolutionRow {
            vehicle_id: inst.vehicles[i].0,
            charger_id: inst.chargers[j].0,
            x: sol.x[(i, j)] as u8,
            energy_kWh: sol.energy[(i, j)],
            wait_min: sol.wait[(i, j)],
            charger_occupied_start: sol.occupied_start[j] as u8,
            objective: sol.objective,
        })
    });
    write_rows(w, rows)
}

/// Reads a solution written for `inst`. The optimality claim is not stored
/// and comes back as exact.
pub fn read_solution<R: Read>(r: R, inst: &AssignmentInstance) -> Result<AssignmentSolution> {
    let rows: Vec<SolutionRow> = read_rows(r)?;
    let (n, m) = (inst.vehicle_count(), inst.charger_count());
    let pairs: Vec<(u32, u32)> = rows.iter().map(|r| (r.vehicle_id, r.charger_id)).collect();
    let (vehicles, chargers) = if rows.is_empty() { (Vec::new(), Vec::new()) } else { grid_shape(&pairs)? };
    let same_ids = vehicles.iter().copied().eq(inst.vehicles.iter().map(|v| v.0))
        && (n == 0 || chargers.iter().copied().eq(inst.chargers.iter().map(|c| c.0)));
    if !same_ids {
        return Err(bad("solution ids do not match the instance"));
    }
    let at = |i: usize, j: usize| &rows[i * m + j];
    Ok(AssignmentSolution {
        x: Matrix::from_fn(n, m, |i, j| at(i, j).x != 0),
        energy: Matrix::from_fn(n, m, |i, j| at(i, j).energy_kWh),
        wait: Matrix::from_fn(n, m, |i, j| at(i, j).wait_min),
        occupied_start: (0..m).map(|j| n > 0 && at(0, j).charger_occupied_start != 0).collect(),
        objective: rows.first().map_or(0.0, |r| r.objective),
        optimality: Optimality::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1970-01-02T00:30:00"), Some(1470.0));
        assert_eq!(parse_timestamp("2018-05-14 08:15"), Some(17665.0 * 1440.0 + 495.0));
        assert_eq!(parse_timestamp("14/05/2018 08:15"), None);
        assert_eq!(format_timestamp(17665.0 * 1440.0 + 495.0), "2018-05-14T08:15:00");
    }

    #[test]
    fn session_rows_are_checked_and_merged() {
        let text = "charger_id,start,end,energy_kWh\n\
                    0,2018-05-14T08:00:00,2018-05-14T08:40:00,20.5\n\
                    0,2018-05-14T08:30:00,2018-05-14T09:00:00,\n\
                    1,2018-05-14T09:00:00,2018-05-14T08:00:00,3\n\
                    x,2018-05-14T09:00:00,2018-05-14T10:00:00,3\n\
                    2,yesterday,2018-05-14T10:00:00,3\n\
                    2,2018-05-14T09:00:00,2018-05-14T10:00:00,-1\n";
        let (records, report) = read_sessions(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].end - records[0].start, 60.0);
        assert_eq!(records[0].energy_kwh, Some(20.5));
        assert_eq!(report.rows, 6);
        assert_eq!(report.accepted, 2);
        assert_eq!(report.merged, 1);
        let reasons: Vec<_> = report.rejected.iter().map(|r| (r.row, r.reason)).collect();
        assert_eq!(
            reasons,
            vec![
                (3, RejectReason::EndNotAfterStart),
                (4, RejectReason::BadNumber),
                (5, RejectReason::BadTimestamp),
                (6, RejectReason::BadNumber)
            ]
        );
    }

    #[test]
    fn consumption_table_round_trip() {
        let t = vec![vec![0.0, 2.04, 1.5], vec![0.0, 0.0, 0.0]];
        let mut buf = Vec::new();
        write_consumption(&mut buf, &t).unwrap();
        assert_eq!(read_consumption(buf.as_slice()).unwrap(), t);
        let shuffled = "vehicle_id,epoch,d_kWh\n0,2,1.0\n";
        assert!(read_consumption(shuffled.as_bytes()).is_err());
    }
}
