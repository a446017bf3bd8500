//! Minute-by-minute accuracy of the occupancy forecasts.

use evcharge_core::demand::{self, ExogenousConfig};
use evcharge_core::occupancy::{
    self, ChargingSessionRecord, HistoricalProfile, NoisyOracle, OccupancyError, PerfectOracle,
};
use evcharge_core::rng::{self, streams};
use evcharge_core::scenario::MINUTES_PER_DAY;
use evcharge_core::ChargerId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub minutes: usize,
    pub matches: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.minutes == 0 {
            0.0
        } else {
            self.matches as f64 / self.minutes as f64
        }
    }
}

fn score(
    predicted: impl Fn(ChargerId, i64) -> bool,
    actual: impl Fn(ChargerId, i64) -> bool,
    chargers: usize,
    minutes: std::ops::Range<i64>,
) -> Result<Accuracy, OccupancyError> {
    let mut total = Accuracy { minutes: 0, matches: 0 };
    for j in 0..chargers as u32 {
        let c = ChargerId(j);
        let p: Vec<bool> = minutes.clone().map(|m| predicted(c, m)).collect();
        let a: Vec<bool> = minutes.clone().map(|m| actual(c, m)).collect();
        let acc = occupancy::predictor_accuracy(&p, &a)?;
        total.minutes += p.len();
        total.matches += (acc * p.len() as f64).round() as usize;
    }
    Ok(total)
}

/// Synthetic outside charging sessions covering at least `minutes` minutes
/// from day 0 on `chargers` chargers.
pub fn synthetic_sessions(seed: u64, cfg: &ExogenousConfig, chargers: usize, minutes: usize) -> Vec<ChargingSessionRecord> {
    let days: Vec<i64> = (0..=(minutes as f64 / MINUTES_PER_DAY) as i64).collect();
    let ids: Vec<ChargerId> = (0..chargers as u32).map(ChargerId).collect();
    demand::exogenous_history(seed, cfg, &ids, &days).expect("valid exogenous config")
}

/// The noisy oracle scored against the sessions it was built from.
pub fn noisy_oracle_accuracy(
    records: &[ChargingSessionRecord],
    chargers: usize,
    flip_probability: f64,
    seed: u64,
    minutes: usize,
) -> Result<Accuracy, OccupancyError> {
    let truth = PerfectOracle::new(chargers, records);
    let noisy = NoisyOracle::new(truth.clone(), flip_probability, rng::derive_seed(seed, streams::FORECAST_NOISE));
    score(
        |c, m| noisy.minute_state(c, m),
        |c, m| truth.occupied_at(c, m as f64),
        chargers,
        0..minutes as i64,
    )
}

/// Historical profile built from `train_days` scored on `test_days`.
pub fn historical_accuracy(
    records: &[ChargingSessionRecord],
    chargers: usize,
    train_days: &[i64],
    test_days: &[i64],
    threshold: f64,
) -> Result<Accuracy, OccupancyError> {
    let profile = HistoricalProfile::from_sessions(chargers, records, train_days, threshold);
    let truth = PerfectOracle::new(chargers, records);
    let day = MINUTES_PER_DAY as i64;
    let mut total = Accuracy { minutes: 0, matches: 0 };
    for &d in test_days {
        let a = score(
            |c, m| profile.minute_state(c, m),
            |c, m| truth.occupied_at(c, m as f64),
            chargers,
            d * day..(d + 1) * day,
        )?;
        total.minutes += a.minutes;
        total.matches += a.matches;
    }
    Ok(total)
}
