use alloc::vec;
use alloc::vec::Vec;

use super::dispatch::{self, Anchor, RouteContext, Stop, StopKind};
use super::event::{EventKind, EventQueue, Occupant};
use super::policy::{self, Candidate};
use super::trace::{TraceKind, TraceRow};
use super::{
    ChargeVisitRecord, DayInputs, EpochLog, SessionLogEntry, SimError, SimOutcome, SoftViolation,
    SoftViolationKind, VehicleStatus, VehicleSummary,
};
use crate::assignment::{
    self, AssignmentError, AssignmentInstance, AssignmentSolution, LagrangianOptions, EXACT_LIMIT,
};
use crate::geometry::Point;
use crate::matrix::Matrix;
use crate::occupancy::{
    arrival_window, AlwaysFree, NoisyOracle, OccupancyError, OccupancyPredictor, PerfectOracle,
    SessionBoundarySequence,
};
use crate::rng::{self, streams};
use crate::scenario::{
    ChargerId, Policy, PredictorKind, RequestId, ScenarioConfig, VehicleId, ENERGY_TOLERANCE,
    MINUTES_PER_DAY,
};

#[derive(Debug, Clone, Copy)]
struct Leg {
    from: Point,
    to: Point,
    depart: f64,
    arrive: f64,
    distance: f64,
}

impl Leg {
    fn fraction(&self, t: f64) -> f64 {
        if self.arrive <= self.depart {
            1.0
        } else {
            ((t - self.depart) / (self.arrive - self.depart)).clamp(0.0, 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ChargeOrder {
    charger: usize,
    target: f64,
    predicted_wait: Option<f64>,
    emergency: bool,
}

#[derive(Debug, Clone, Copy)]
struct ChargeTrip {
    order: ChargeOrder,
    departed: f64,
    access: f64,
    arrival: f64,
    start: f64,
    soc_on_arrival: f64,
    energy: f64,
}

#[derive(Debug)]
struct Vehicle {
    id: VehicleId,
    /// Location at the start of the current leg, or the current location.
    pos: Point,
    /// SOC at `pos`; the current leg's energy is booked when it ends.
    soc: f64,
    soc_initial: f64,
    odometer: f64,
    status: VehicleStatus,
    leg: Option<Leg>,
    /// Passenger stops; while a leg is under way `route[0]` is its
    /// destination.
    route: Vec<Stop>,
    load: u32,
    order: Option<ChargeOrder>,
    trip: Option<ChargeTrip>,
    charged: f64,
    served: usize,
}

impl Vehicle {
    fn is_idle(&self) -> bool {
        self.status == VehicleStatus::Available && self.route.is_empty() && self.leg.is_none()
    }

    fn position_at(&self, t: f64) -> Point {
        match &self.leg {
            Some(l) => l.from.lerp(l.to, l.fraction(t)),
            None => self.pos,
        }
    }

    fn soc_at(&self, t: f64, mu: f64) -> f64 {
        match &self.leg {
            Some(l) => self.soc - mu * l.distance * l.fraction(t),
            None => self.soc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RequestState {
    Waiting,
    Pending,
    Assigned,
    Served,
    Rejected,
}

pub(super) struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    inputs: &'a DayInputs<'a>,
    policy: Policy,
    epochs: usize,
    charger_pos: Vec<Point>,
    rates: Vec<f64>,
    busy_until: Vec<f64>,
    queue: EventQueue,
    now: f64,
    vehicles: Vec<Vehicle>,
    pickup_time: Vec<Option<f64>>,
    requests: Vec<RequestState>,
    pending: Vec<usize>,
    postponed: Vec<Candidate>,
    noise_seed: u64,
    out: SimOutcome,
}

impl<'a> Sim<'a> {
    pub(super) fn new(cfg: &'a ScenarioConfig, inputs: &'a DayInputs<'a>) -> Result<Self, SimError> {
        cfg.validate()?;
        let epochs = cfg.grid.epoch_count();
        let n = cfg.fleet_size;
        if cfg.policy.uses_plan() {
            if inputs.plans.len() != n {
                return Err(SimError::PlanCount {
                    expected: n,
                    found: inputs.plans.len(),
                });
            }
            for (i, p) in inputs.plans.iter().enumerate() {
                if p.vehicle != VehicleId(i as u32) || p.epochs() != epochs {
                    return Err(SimError::PlanShape {
                        index: i,
                        vehicle: p.vehicle,
                        expected: epochs,
                        found: p.epochs(),
                    });
                }
            }
        }
        if cfg.policy == Policy::Predictive
            && cfg.predictor.kind == PredictorKind::HistoricalProfile
            && inputs.history.is_none()
        {
            return Err(SimError::MissingHistory);
        }
        if inputs
            .requests
            .windows(2)
            .any(|w| w[1].arrival < w[0].arrival)
        {
            return Err(SimError::UnsortedDemand);
        }
        let b = cfg.vehicle.battery_capacity;
        let soc0: Vec<f64> = match inputs.initial_soc {
            Some(s) if s.len() == n && s.iter().all(|&e| (0.0..=b).contains(&e)) => s.to_vec(),
            Some(_) => return Err(SimError::InitialSoc),
            None => vec![cfg.vehicle.e_init; n],
        };
        let vehicles = soc0
            .iter()
            .enumerate()
            .map(|(i, &soc)| Vehicle {
                id: VehicleId(i as u32),
                pos: cfg.depot,
                soc,
                soc_initial: soc,
                odometer: 0.0,
                status: VehicleStatus::Available,
                leg: None,
                route: Vec::new(),
                load: 0,
                order: None,
                trip: None,
                charged: 0.0,
                served: 0,
            })
            .collect();
        let m = cfg.chargers.len();
        Ok(Self {
            cfg,
            inputs,
            policy: cfg.policy,
            epochs,
            charger_pos: cfg.chargers.iter().map(|c| c.location).collect(),
            rates: cfg.chargers.iter().map(|c| c.rate).collect(),
            busy_until: vec![f64::NEG_INFINITY; m],
            queue: EventQueue::default(),
            now: cfg.grid.day_start,
            vehicles,
            pickup_time: vec![None; inputs.requests.len()],
            requests: vec![RequestState::Waiting; inputs.requests.len()],
            pending: Vec::new(),
            postponed: Vec::new(),
            noise_seed: rng::derive_seed(cfg.seed, streams::FORECAST_NOISE),
            out: SimOutcome {
                policy: cfg.policy,
                visits: Vec::new(),
                sessions: Vec::new(),
                trace: Vec::new(),
                consumption: vec![vec![0.0; epochs]; n],
                vehicles: Vec::new(),
                served: 0,
                rejected: 0,
                soft_violations: Vec::new(),
                epochs: Vec::new(),
            },
        })
    }

    fn mu(&self) -> f64 {
        self.cfg.vehicle.consumption_rate
    }

    fn minutes(&self, km: f64) -> f64 {
        km / self.cfg.vehicle.speed_kmh * 60.0
    }

    fn row(&self, kind: TraceKind) -> TraceRow {
        TraceRow::new(self.now, kind)
    }

    fn vehicle_row(&self, kind: TraceKind, v: usize) -> TraceRow {
        let veh = &self.vehicles[v];
        TraceRow {
            vehicle: Some(veh.id),
            soc: Some(veh.soc),
            odometer: Some(veh.odometer),
            ..self.row(kind)
        }
    }

    fn soft(&mut self, kind: SoftViolationKind, v: Option<usize>) {
        let (vehicle, soc) = match v {
            Some(v) => (Some(self.vehicles[v].id), Some(self.vehicles[v].soc)),
            None => (None, None),
        };
        self.out.soft_violations.push(SoftViolation {
            time: self.now,
            vehicle,
            kind,
            soc,
        });
    }

    pub(super) fn run(mut self) -> Result<SimOutcome, SimError> {
        for (k, r) in self.inputs.requests.iter().enumerate() {
            self.queue.push(r.arrival, EventKind::NewRequest { request: k });
        }
        for (k, s) in self.inputs.exogenous.iter().enumerate() {
            if s.charger.index() < self.charger_pos.len() {
                self.queue.push(
                    s.arrival,
                    EventKind::ArrivalAtCharger {
                        charger: s.charger.index(),
                        occupant: Occupant::Exogenous(k as u32),
                    },
                );
            }
        }
        for h in 1..=self.epochs {
            self.queue
                .push(self.cfg.grid.epoch_start(h), EventKind::EpochBoundary { epoch: h });
        }
        while let Some(ev) = self.queue.pop() {
            self.now = ev.time;
            match ev.kind {
                EventKind::NewRequest { request } => self.on_request(request),
                EventKind::StopReached { vehicle } => self.on_stop(vehicle)?,
                EventKind::ArrivalAtCharger { charger, occupant } => {
                    self.on_charger_arrival(charger, occupant)?
                }
                EventKind::LeaveCharger { charger, occupant } => self.on_leave(charger, occupant),
                EventKind::EpochBoundary { epoch } => self.on_epoch(epoch)?,
            }
        }
        self.close_day()?;
        Ok(self.out)
    }

    // ---- requests ------------------------------------------------------

    fn route_context(&self) -> RouteContext<'_> {
        let v = &self.cfg.vehicle;
        RouteContext {
            requests: self.inputs.requests,
            pickup_time: &self.pickup_time,
            chargers: &self.charger_pos,
            seats: v.seat_capacity,
            speed_kmh: v.speed_kmh,
            consumption_rate: v.consumption_rate,
            e_min: v.e_min,
            max_pickup_delay: self.cfg.rejection_deadline,
        }
    }

    fn eligible(&self, v: &Vehicle) -> bool {
        matches!(v.status, VehicleStatus::Available | VehicleStatus::Serving)
            && v.order.is_none()
            && !(self.policy == Policy::NeedBased && self.below_need_threshold(v.soc))
    }

    fn below_need_threshold(&self, soc: f64) -> bool {
        soc < self.cfg.need_threshold * self.cfg.vehicle.battery_capacity
    }

    fn anchor(&self, v: &Vehicle) -> Anchor {
        match (&v.leg, v.route.first()) {
            (Some(leg), Some(s0)) => {
                let r = &self.inputs.requests[s0.request];
                let time = leg.arrive.max(s0.earliest);
                let (load, pending_pickup) = match s0.kind {
                    StopKind::Pickup => (v.load + r.party_size, Some((s0.request, time))),
                    StopKind::Dropoff => (v.load.saturating_sub(r.party_size), None),
                };
                Anchor {
                    pos: s0.location,
                    time,
                    soc: v.soc - self.mu() * leg.distance,
                    load,
                    pending_pickup,
                }
            }
            _ => Anchor {
                pos: v.pos,
                time: self.now,
                soc: v.soc,
                load: v.load,
                pending_pickup: None,
            },
        }
    }

    fn try_dispatch(&mut self, k: usize) -> bool {
        let ctx = self.route_context();
        let mut best: Option<(f64, usize, dispatch::Insertion)> = None;
        for (i, v) in self.vehicles.iter().enumerate() {
            if !self.eligible(v) {
                continue;
            }
            let anchor = self.anchor(v);
            let rest = if v.leg.is_some() { &v.route[1..] } else { &v.route[..] };
            if let Some(ins) = dispatch::best_insertion(&anchor, rest, k, &ctx) {
                if best.map_or(true, |(b, _, _)| ins.added_km < b - 1e-9) {
                    best = Some((ins.added_km, i, ins));
                }
            }
        }
        let Some((_, i, ins)) = best else {
            return false;
        };
        let r = &self.inputs.requests[k];
        let v = &mut self.vehicles[i];
        if v.leg.is_some() {
            let mut rest = v.route.split_off(1);
            dispatch::apply(&mut rest, k, r, ins);
            v.route.extend(rest);
        } else {
            dispatch::apply(&mut v.route, k, r, ins);
        }
        self.requests[k] = RequestState::Assigned;
        let row = TraceRow {
            request: Some(r.id),
            ..self.vehicle_row(TraceKind::RequestAssigned, i)
        };
        self.out.trace.push(row);
        if self.vehicles[i].leg.is_none() {
            self.vehicles[i].status = VehicleStatus::Serving;
            self.start_next_stop(i);
        }
        true
    }

    fn on_request(&mut self, k: usize) {
        let row = TraceRow {
            request: Some(self.inputs.requests[k].id),
            ..self.row(TraceKind::RequestPlaced)
        };
        self.out.trace.push(row);
        if !self.try_dispatch(k) {
            self.requests[k] = RequestState::Pending;
            self.pending.push(k);
        }
    }

    fn reject(&mut self, k: usize) {
        self.requests[k] = RequestState::Rejected;
        self.out.rejected += 1;
        let row = TraceRow {
            request: Some(RequestId(self.inputs.requests[k].id.0)),
            ..self.row(TraceKind::RequestRejected)
        };
        self.out.trace.push(row);
    }

    fn retry_pending(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let pending = core::mem::take(&mut self.pending);
        let mut keep = Vec::with_capacity(pending.len());
        for k in pending {
            let r = &self.inputs.requests[k];
            if self.now > r.desired_pickup + self.cfg.rejection_deadline + 1e-9 {
                self.reject(k);
            } else if !self.try_dispatch(k) {
                keep.push(k);
            }
        }
        self.pending = keep;
    }

    // ---- driving -------------------------------------------------------

    fn start_leg(&mut self, v: usize, to: Point) -> f64 {
        let veh = &self.vehicles[v];
        let distance = veh.pos.distance(to);
        let arrive = self.now + self.minutes(distance);
        self.vehicles[v].leg = Some(Leg {
            from: veh.pos,
            to,
            depart: self.now,
            arrive,
            distance,
        });
        arrive
    }

    fn start_next_stop(&mut self, v: usize) {
        let to = self.vehicles[v].route[0].location;
        let arrive = self.start_leg(v, to);
        self.queue.push(arrive, EventKind::StopReached { vehicle: v });
    }

    /// Books the current leg: energy, odometer, per-epoch consumption.
    fn finish_leg(&mut self, v: usize) -> Result<(), SimError> {
        let Some(leg) = self.vehicles[v].leg.take() else {
            return Ok(());
        };
        let energy = self.mu() * leg.distance;
        self.attribute(v, &leg, energy);
        let e_min = self.cfg.vehicle.e_min;
        let veh = &mut self.vehicles[v];
        let before = veh.soc;
        veh.soc -= energy;
        veh.odometer += leg.distance;
        veh.pos = leg.to;
        if veh.soc < -ENERGY_TOLERANCE {
            return Err(SimError::NegativeSoc {
                vehicle: veh.id,
                time: self.now,
                soc: veh.soc,
            });
        }
        if veh.soc < e_min - ENERGY_TOLERANCE && before >= e_min - ENERGY_TOLERANCE {
            self.soft(SoftViolationKind::BelowReserve, Some(v));
            let row = self.vehicle_row(TraceKind::ReserveViolation, v);
            self.out.trace.push(row);
        }
        Ok(())
    }

    /// Splits a leg's energy over epochs by time overlap. Time before the
    /// day counts in the first epoch, time after it in the last.
    fn attribute(&mut self, v: usize, leg: &Leg, energy: f64) {
        if energy == 0.0 {
            return;
        }
        let grid = &self.cfg.grid;
        let row = &mut self.out.consumption[v];
        let (h0, h1) = (grid.epoch_clamped(leg.depart), grid.epoch_clamped(leg.arrive));
        if h0 == h1 || leg.arrive <= leg.depart {
            row[h0 - 1] += energy;
            return;
        }
        let span = leg.arrive - leg.depart;
        let mut booked = 0.0;
        for h in h0..=h1 {
            let lo = if h == 1 { f64::NEG_INFINITY } else { grid.epoch_start(h) };
            let hi = if h == self.epochs { f64::INFINITY } else { grid.epoch_end(h) };
            let share = if h == h1 {
                energy - booked
            } else {
                let overlap = leg.arrive.min(hi) - leg.depart.max(lo);
                energy * overlap.max(0.0) / span
            };
            row[h - 1] += share;
            booked += share;
        }
    }

    fn on_stop(&mut self, v: usize) -> Result<(), SimError> {
        self.finish_leg(v)?;
        let s0 = self.vehicles[v].route[0];
        if s0.earliest > self.now + 1e-9 {
            // Early for the pickup: wait in place.
            let pos = self.vehicles[v].pos;
            self.vehicles[v].leg = Some(Leg {
                from: pos,
                to: pos,
                depart: self.now,
                arrive: s0.earliest,
                distance: 0.0,
            });
            self.queue.push(s0.earliest, EventKind::StopReached { vehicle: v });
            return Ok(());
        }
        self.vehicles[v].route.remove(0);
        let r = &self.inputs.requests[s0.request];
        let kind = match s0.kind {
            StopKind::Pickup => {
                self.pickup_time[s0.request] = Some(self.now);
                self.vehicles[v].load += r.party_size;
                TraceKind::Pickup
            }
            StopKind::Dropoff => {
                let veh = &mut self.vehicles[v];
                veh.load = veh.load.saturating_sub(r.party_size);
                veh.served += 1;
                self.requests[s0.request] = RequestState::Served;
                self.out.served += 1;
                TraceKind::Dropoff
            }
        };
        let row = TraceRow {
            request: Some(r.id),
            ..self.vehicle_row(kind, v)
        };
        self.out.trace.push(row);
        if self.vehicles[v].route.is_empty() {
            self.become_idle(v);
        } else {
            self.start_next_stop(v);
        }
        self.retry_pending();
        Ok(())
    }

    fn become_idle(&mut self, v: usize) {
        self.vehicles[v].status = VehicleStatus::Available;
        if let Some(order) = self.vehicles[v].order.take() {
            self.go_charge(v, order);
        } else {
            self.need_based_check(v);
        }
    }

    fn need_based_check(&mut self, v: usize) {
        if self.policy != Policy::NeedBased || !self.vehicles[v].is_idle() {
            return;
        }
        if !self.below_need_threshold(self.vehicles[v].soc) {
            return;
        }
        if let Some(j) = policy::nearest_charger(self.vehicles[v].pos, &self.charger_pos) {
            let row = TraceRow {
                charger: Some(ChargerId(j as u32)),
                ..self.vehicle_row(TraceKind::ChargeAssigned, v)
            };
            self.out.trace.push(row);
            self.go_charge(
                v,
                ChargeOrder {
                    charger: j,
                    target: self.cfg.vehicle.e_max,
                    predicted_wait: None,
                    emergency: false,
                },
            );
        }
    }

    fn go_charge(&mut self, v: usize, order: ChargeOrder) {
        let arrive = self.start_leg(v, self.charger_pos[order.charger]);
        let veh = &mut self.vehicles[v];
        veh.status = VehicleStatus::GoCharging;
        veh.trip = Some(ChargeTrip {
            order,
            departed: self.now,
            access: arrive - self.now,
            arrival: arrive,
            start: arrive,
            soc_on_arrival: 0.0,
            energy: 0.0,
        });
        self.queue.push(
            arrive,
            EventKind::ArrivalAtCharger {
                charger: order.charger,
                occupant: Occupant::Fleet(veh.id),
            },
        );
    }

    // ---- chargers ------------------------------------------------------

    /// Joins the FIFO line at charger `j`; returns the plug-in time.
    fn enqueue(&mut self, j: usize, occupant: Occupant, minutes: f64) -> f64 {
        let start = self.now.max(self.busy_until[j]);
        let end = start + minutes;
        self.busy_until[j] = end;
        self.out.sessions.push(SessionLogEntry {
            charger: ChargerId(j as u32),
            occupant,
            arrival: self.now,
            start,
            end,
        });
        self.queue.push(end, EventKind::LeaveCharger { charger: j, occupant });
        start
    }

    fn on_charger_arrival(&mut self, j: usize, occupant: Occupant) -> Result<(), SimError> {
        let v = match occupant {
            Occupant::Exogenous(k) => {
                let s = self.inputs.exogenous[k as usize];
                let row = TraceRow {
                    charger: Some(ChargerId(j as u32)),
                    exogenous: Some(s.id),
                    ..self.row(TraceKind::ArrivalAtCharger)
                };
                self.out.trace.push(row);
                self.enqueue(j, occupant, s.duration);
                return Ok(());
            }
            Occupant::Fleet(id) => id.index(),
        };
        self.finish_leg(v)?;
        let mut trip = self.vehicles[v].trip.expect("vehicle heading to a charger has a trip");
        let soc = self.vehicles[v].soc;
        let row = TraceRow {
            charger: Some(ChargerId(j as u32)),
            ..self.vehicle_row(TraceKind::ArrivalAtCharger, v)
        };
        self.out.trace.push(row);
        let target = trip.order.target.min(self.cfg.vehicle.e_max);
        if soc >= target - ENERGY_TOLERANCE {
            let row = TraceRow {
                charger: Some(ChargerId(j as u32)),
                ..self.vehicle_row(TraceKind::ChargeSkipped, v)
            };
            self.out.trace.push(row);
            self.vehicles[v].trip = None;
            self.become_idle(v);
            self.retry_pending();
            return Ok(());
        }
        let energy = target - soc;
        let start = self.enqueue(j, occupant, energy / self.rates[j]);
        trip.arrival = self.now;
        trip.start = start;
        trip.soc_on_arrival = soc;
        trip.energy = energy;
        let veh = &mut self.vehicles[v];
        veh.trip = Some(trip);
        veh.status = if start > self.now {
            VehicleStatus::WaitingAtCharger
        } else {
            VehicleStatus::Charging
        };
        Ok(())
    }

    fn on_leave(&mut self, j: usize, occupant: Occupant) {
        let v = match occupant {
            Occupant::Exogenous(k) => {
                let s = self.inputs.exogenous[k as usize];
                let row = TraceRow {
                    charger: Some(ChargerId(j as u32)),
                    exogenous: Some(s.id),
                    charge_minutes: Some(s.duration),
                    ..self.row(TraceKind::LeaveCharger)
                };
                self.out.trace.push(row);
                return;
            }
            Occupant::Fleet(id) => id.index(),
        };
        let trip = self.vehicles[v].trip.take().expect("charging vehicle has a trip");
        let veh = &mut self.vehicles[v];
        veh.soc += trip.energy;
        veh.charged += trip.energy;
        let charge_minutes = self.now - trip.start;
        let wait = trip.start - trip.arrival;
        let visit = ChargeVisitRecord {
            vehicle: veh.id,
            charger: ChargerId(j as u32),
            departed: trip.departed,
            arrival: trip.arrival,
            start: trip.start,
            end: self.now,
            access: trip.access,
            wait,
            charge_minutes,
            energy: trip.energy,
            soc_on_arrival: trip.soc_on_arrival,
            soc_after: veh.soc,
            target: trip.order.target,
            predicted_wait: trip.order.predicted_wait,
            emergency: trip.order.emergency,
        };
        self.out.visits.push(visit);
        let row = TraceRow {
            charger: Some(ChargerId(j as u32)),
            wait: Some(wait),
            charge_minutes: Some(charge_minutes),
            energy: Some(trip.energy),
            access: Some(trip.access),
            ..self.vehicle_row(TraceKind::LeaveCharger, v)
        };
        self.out.trace.push(row);
        self.become_idle(v);
        self.retry_pending();
    }

    // ---- epoch boundaries ---------------------------------------------

    fn on_epoch(&mut self, h: usize) -> Result<(), SimError> {
        self.out.trace.push(self.row(TraceKind::EpochBoundary));
        match self.policy {
            Policy::NeedBased => {
                for v in 0..self.vehicles.len() {
                    self.need_based_check(v);
                }
            }
            Policy::Planned | Policy::Predictive => self.assign_epoch(h)?,
        }
        self.retry_pending();
        Ok(())
    }

    fn can_join_list(v: &Vehicle) -> bool {
        matches!(v.status, VehicleStatus::Available | VehicleStatus::Serving)
            && v.order.is_none()
            && v.trip.is_none()
    }

    fn assign_epoch(&mut self, h: usize) -> Result<(), SimError> {
        let mu = self.mu();
        let (e_min, e_max) = (self.cfg.vehicle.e_min, self.cfg.vehicle.e_max);
        let mut log = EpochLog {
            epoch: h,
            ..EpochLog::default()
        };
        let mut list: Vec<Candidate> = core::mem::take(&mut self.postponed);
        for (i, plan) in self.inputs.plans.iter().enumerate() {
            let Some(target) = plan.target(h) else { continue };
            let target = target.min(e_max);
            match list.iter_mut().find(|c| c.vehicle.index() == i) {
                Some(c) => c.target = c.target.max(target),
                None => list.push(Candidate {
                    vehicle: VehicleId(i as u32),
                    soc: 0.0,
                    target,
                }),
            }
        }
        list.retain(|c| Self::can_join_list(&self.vehicles[c.vehicle.index()]));
        log.listed = list.len();

        let mut due = Vec::with_capacity(list.len());
        for mut c in list {
            let v = c.vehicle.index();
            let soc = self.vehicles[v].soc_at(self.now, mu);
            c.soc = soc;
            if soc >= c.target - ENERGY_TOLERANCE {
                log.skipped += 1;
                let row = self.vehicle_row(TraceKind::ChargeSkipped, v);
                self.out.trace.push(row);
                continue;
            }
            let pos = self.vehicles[v].position_at(self.now);
            let reachable = self
                .charger_pos
                .iter()
                .any(|p| soc - mu * pos.distance(*p) >= e_min - ENERGY_TOLERANCE);
            if !reachable {
                log.emergency += 1;
                self.emergency(c);
                continue;
            }
            due.push(c);
        }

        let (now_list, later) = policy::postpone(due, self.charger_pos.len());
        log.postponed = later.len();
        for c in later {
            self.postpone_one(c, h);
        }
        if now_list.is_empty() {
            self.out.epochs.push(log);
            return Ok(());
        }

        // Vehicles the matching cannot cover (several low vehicles that can
        // only reach the same charger) go to their nearest charger instead.
        let mut now_list = now_list;
        let (inst, sol) = loop {
            let inst = self.build_instance(&now_list)?;
            match self.solve(&inst) {
                Ok(sol) => break (inst, sol),
                Err(AssignmentError::Infeasible { blocked }) if !blocked.is_empty() => {
                    self.soft(SoftViolationKind::NoFeasibleAssignment, None);
                    let (out, keep): (Vec<Candidate>, Vec<Candidate>) =
                        now_list.into_iter().partition(|c| blocked.contains(&c.vehicle));
                    for c in out {
                        log.emergency += 1;
                        self.emergency(c);
                    }
                    now_list = keep;
                    if now_list.is_empty() {
                        self.out.epochs.push(log);
                        return Ok(());
                    }
                }
                Err(e) => return Err(SimError::Assignment(e)),
            }
        };
        log.objective = Some(sol.objective);
        if let assignment::Optimality::Lagrangian { gap, .. } = sol.optimality {
            log.gap = Some(gap);
        }
        for (i, j) in sol.pairs() {
            let v = now_list[i].vehicle.index();
            log.assigned += 1;
            let row = TraceRow {
                charger: Some(ChargerId(j as u32)),
                wait: Some(sol.wait[(i, j)]),
                energy: Some(sol.energy[(i, j)]),
                ..self.vehicle_row(TraceKind::ChargeAssigned, v)
            };
            self.out.trace.push(row);
            self.issue(
                v,
                ChargeOrder {
                    charger: j,
                    target: now_list[i].target,
                    predicted_wait: Some(sol.wait[(i, j)]),
                    emergency: false,
                },
            );
        }
        debug_assert_eq!(inst.vehicle_count(), now_list.len());
        self.out.epochs.push(log);
        Ok(())
    }

    fn solve(&self, inst: &AssignmentInstance) -> Result<AssignmentSolution, AssignmentError> {
        if inst.vehicle_count() <= EXACT_LIMIT && inst.charger_count() <= EXACT_LIMIT {
            assignment::solve_exact(inst)
        } else {
            let opts = LagrangianOptions {
                iterations: self.cfg.lagrangian_iterations,
                ..LagrangianOptions::default()
            };
            assignment::solve_lagrangian(inst, &opts)
        }
    }

    /// Sends a vehicle to its nearest charger outside the assignment.
    fn emergency(&mut self, c: Candidate) {
        let v = c.vehicle.index();
        self.soft(SoftViolationKind::EmergencyCharge, Some(v));
        let pos = self.vehicles[v].position_at(self.now);
        let j = policy::nearest_charger(pos, &self.charger_pos).unwrap_or(0);
        let row = TraceRow {
            charger: Some(ChargerId(j as u32)),
            ..self.vehicle_row(TraceKind::EmergencyCharge, v)
        };
        self.out.trace.push(row);
        self.issue(
            v,
            ChargeOrder {
                charger: j,
                target: c.target,
                predicted_wait: None,
                emergency: true,
            },
        );
    }

    fn postpone_one(&mut self, c: Candidate, h: usize) {
        let v = c.vehicle.index();
        let row = self.vehicle_row(TraceKind::ChargePostponed, v);
        self.out.trace.push(row);
        if h < self.epochs {
            self.postponed.push(c);
        } else {
            self.soft(SoftViolationKind::DroppedAtDayEnd, Some(v));
        }
    }

    /// Idle vehicles leave at once; busy ones go after their last dropoff.
    fn issue(&mut self, v: usize, order: ChargeOrder) {
        if self.vehicles[v].is_idle() {
            self.go_charge(v, order);
        } else {
            self.vehicles[v].order = Some(order);
        }
    }

    fn build_instance(&self, list: &[Candidate]) -> Result<AssignmentInstance, SimError> {
        let mu = self.mu();
        let (n, m) = (list.len(), self.charger_pos.len());
        let pos: Vec<Point> = list
            .iter()
            .map(|c| self.vehicles[c.vehicle.index()].position_at(self.now))
            .collect();
        let distance_km = Matrix::from_fn(n, m, |i, j| pos[i].distance(self.charger_pos[j]));
        let travel_min = Matrix::from_fn(n, m, |i, j| self.minutes(distance_km[(i, j)]));
        let horizon = self.cfg.predictor.horizon;
        let forecasts = self.forecasts(horizon)?;
        let windows = Matrix::from_fn(n, m, |i, j| {
            arrival_window(&forecasts[j], self.now + travel_min[(i, j)])
                .expect("forecast has at least one slot")
                .shifted(self.now)
        });
        Ok(AssignmentInstance {
            vehicles: list.iter().map(|c| c.vehicle).collect(),
            chargers: (0..m as u32).map(ChargerId).collect(),
            travel_min,
            distance_km,
            soc: list.iter().map(|c| c.soc).collect(),
            target: list.iter().map(|c| c.target).collect(),
            windows,
            rates: self.rates.clone(),
            consumption_rate: mu,
            theta1: self.cfg.theta1,
            theta2: self.cfg.theta2,
            big_m1: self.cfg.big_m1(),
            big_m2: self.cfg.big_m2(),
            e_min: self.cfg.vehicle.e_min,
        })
    }

    fn forecasts(&self, horizon: f64) -> Result<Vec<SessionBoundarySequence>, SimError> {
        let m = self.charger_pos.len();
        let kind = match self.policy {
            Policy::Predictive => self.cfg.predictor.kind,
            _ => PredictorKind::AlwaysFree,
        };
        let wrap = |e: OccupancyError| SimError::Config(crate::ScenarioError::InvalidParameter(match e {
            OccupancyError::InvalidHorizon => "forecast horizon must be positive",
            _ => "forecast failed",
        }));
        let run = |p: &dyn OccupancyPredictor, offset: f64| -> Result<Vec<SessionBoundarySequence>, SimError> {
            (0..m)
                .map(|j| {
                    let mut seq = p.predict(ChargerId(j as u32), self.now + offset, horizon).map_err(wrap)?;
                    for b in &mut seq.boundaries {
                        *b -= offset;
                    }
                    Ok(seq)
                })
                .collect()
        };
        match kind {
            PredictorKind::AlwaysFree => run(&AlwaysFree { chargers: m }, 0.0),
            PredictorKind::PerfectOracle => run(&PerfectOracle::from_intervals(self.projected_truth(horizon)), 0.0),
            PredictorKind::NoisyOracle => {
                let truth = PerfectOracle::from_intervals(self.projected_truth(horizon));
                run(
                    &NoisyOracle::new(truth, self.cfg.predictor.flip_probability, self.noise_seed),
                    0.0,
                )
            }
            PredictorKind::HistoricalProfile => {
                let history = self.inputs.history.ok_or(SimError::MissingHistory)?;
                run(history, self.cfg.calendar_day as f64 * MINUTES_PER_DAY)
            }
        }
    }

    /// Busy intervals per charger as they will unfold if nothing new is
    /// decided: sessions already in line, outside EVs due to arrive, and
    /// fleet vehicles already heading to a charger, all queued FIFO.
    fn projected_truth(&self, horizon: f64) -> Vec<Vec<(f64, f64)>> {
        let m = self.charger_pos.len();
        let mu = self.mu();
        let mut busy: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
        let mut future: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
        for s in &self.out.sessions {
            if s.end > self.now {
                busy[s.charger.index()].push((s.start, s.end));
            }
        }
        let until = self.now + horizon;
        for s in self.inputs.exogenous {
            if s.arrival > self.now && s.arrival < until && s.charger.index() < m {
                future[s.charger.index()].push((s.arrival, s.duration));
            }
        }
        for v in &self.vehicles {
            let (j, arrival, soc, target) = match (v.status, &v.trip, &v.order) {
                (VehicleStatus::GoCharging, Some(trip), _) => {
                    let leg = v.leg.as_ref().expect("driving vehicle has a leg");
                    (trip.order.charger, leg.arrive, v.soc - mu * leg.distance, trip.order.target)
                }
                (_, None, Some(order)) => {
                    let a = self.anchor(v);
                    let rest = if v.leg.is_some() { &v.route[1..] } else { &v.route[..] };
                    let (mut pos, mut t, mut km) = (a.pos, a.time, 0.0);
                    for s in rest {
                        let d = pos.distance(s.location);
                        km += d;
                        t = (t + self.minutes(d)).max(s.earliest);
                        pos = s.location;
                    }
                    let d = pos.distance(self.charger_pos[order.charger]);
                    (order.charger, t + self.minutes(d), a.soc - mu * (km + d), order.target)
                }
                _ => continue,
            };
            let minutes = (target.min(self.cfg.vehicle.e_max) - soc).max(0.0) / self.rates[j];
            if minutes > 0.0 {
                future[j].push((arrival, minutes));
            }
        }
        for j in 0..m {
            future[j].sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cursor = self.busy_until[j];
            for &(arrival, minutes) in &future[j] {
                let start = arrival.max(cursor);
                cursor = start + minutes;
                busy[j].push((start, cursor));
            }
        }
        busy
    }

    // ---- end of day ----------------------------------------------------

    fn close_day(&mut self) -> Result<(), SimError> {
        for k in core::mem::take(&mut self.pending) {
            self.reject(k);
        }
        self.now = self.now.max(self.cfg.grid.day_end);
        for v in 0..self.vehicles.len() {
            if self.vehicles[v].pos.distance(self.cfg.depot) > 0.0 {
                self.start_leg(v, self.cfg.depot);
                self.finish_leg(v)?;
                let row = self.vehicle_row(TraceKind::ReturnToDepot, v);
                self.out.trace.push(row);
            }
        }
        for v in 0..self.vehicles.len() {
            let row = self.vehicle_row(TraceKind::DayEnd, v);
            self.out.trace.push(row);
            let veh = &self.vehicles[v];
            self.out.vehicles.push(VehicleSummary {
                vehicle: veh.id,
                soc_initial: veh.soc_initial,
                soc_final: veh.soc,
                odometer_km: veh.odometer,
                energy_charged: veh.charged,
                requests_served: veh.served,
            });
        }
        debug_assert!(self.requests.iter().all(|s| matches!(s, RequestState::Served | RequestState::Rejected)));
        Ok(())
    }
}
