//! Scenario configuration: a TOML file with every field optional, then
//! command-line overrides on top.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use evcharge_core::scenario::{Policy, PredictorKind};
use evcharge_core::ScenarioConfig;

pub fn load(path: Option<&Path>) -> Result<ScenarioConfig> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse(text: &str) -> Result<ScenarioConfig> {
    Ok(toml::from_str(text)?)
}

pub fn to_toml(cfg: &ScenarioConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

pub fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::from_label(s).ok_or_else(|| format!("unknown policy `{s}` (expected NP, OCP0 or OCP*)"))
}

pub fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    match s {
        "always-free" => Ok(PredictorKind::AlwaysFree),
        "historical-profile" => Ok(PredictorKind::HistoricalProfile),
        "perfect-oracle" => Ok(PredictorKind::PerfectOracle),
        "noisy-oracle" => Ok(PredictorKind::NoisyOracle),
        _ => Err(format!(
            "unknown predictor `{s}` (expected always-free, historical-profile, perfect-oracle or noisy-oracle)"
        )),
    }
}

/// Flags that override single configuration fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Scenario TOML file; missing fields keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub fleet_size: Option<usize>,
    #[arg(long, global = true)]
    pub customers: Option<usize>,
    #[arg(long, global = true, value_parser = parse_predictor)]
    pub predictor: Option<PredictorKind>,
    #[arg(long, global = true)]
    pub flip_probability: Option<f64>,
    /// Forecast horizon, minutes.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub theta1: Option<f64>,
    #[arg(long, global = true)]
    pub theta2: Option<f64>,
    /// Largest charge per epoch, kWh.
    #[arg(long, global = true)]
    pub u_max: Option<f64>,
    #[arg(long, global = true)]
    pub soc_step: Option<f64>,
    /// Need-based charging threshold as a share of battery capacity.
    #[arg(long, global = true)]
    pub need_threshold: Option<f64>,
    /// Minutes past the desired pickup before a request is rejected.
    #[arg(long, global = true)]
    pub rejection_deadline: Option<f64>,
    #[arg(long, global = true)]
    pub training_days: Option<usize>,
    /// Outside EV arrivals per charger per hour.
    #[arg(long, global = true)]
    pub exogenous_rate: Option<f64>,
    #[arg(long, global = true)]
    pub lagrangian_iterations: Option<usize>,
    /// Start-of-day battery level, kWh.
    #[arg(long, global = true)]
    pub e_init: Option<f64>,
}

impl Overrides {
    /// Loads the configuration file, if any, and applies the flags.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = load(self.config.as_deref())?;
        self.apply(&mut cfg);
        if let Err(e) = cfg.validate() {
            bail!("invalid configuration: {e}");
        }
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        macro_rules! set {
            ($flag:ident => $($field:tt)+) => {
                if let Some(v) = self.$flag {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(fleet_size => fleet_size);
        set!(customers => demand.customer_count);
        set!(predictor => predictor.kind);
        set!(flip_probability => predictor.flip_probability);
        set!(horizon => predictor.horizon);
        set!(theta1 => theta1);
        set!(theta2 => theta2);
        set!(u_max => u_max);
        set!(soc_step => soc_step);
        set!(need_threshold => need_threshold);
        set!(rejection_deadline => rejection_deadline);
        set!(training_days => training_days);
        set!(exogenous_rate => exogenous.arrivals_per_hour);
        set!(lagrangian_iterations => lagrangian_iterations);
        set!(e_init => vehicle.e_init);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_scenario() {
        assert_eq!(parse("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig {
            seed: 99,
            policy: Policy::Planned,
            ..ScenarioConfig::default()
        };
        assert_eq!(parse(&to_toml(&cfg).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_and_flags() {
        let mut cfg = parse("fleet_size = 12\n[vehicle]\ne_init = 40.0\n[predictor]\nkind = \"perfect-oracle\"\n").unwrap();
        assert_eq!(cfg.fleet_size, 12);
        assert_eq!(cfg.vehicle.e_init, 40.0);
        assert_eq!(cfg.vehicle.e_max, 49.6);
        assert_eq!(cfg.predictor.kind, PredictorKind::PerfectOracle);
        Overrides {
            seed: Some(3),
            customers: Some(10),
            ..Overrides::default()
        }
        .apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.demand.customer_count, cfg.fleet_size), (3, 10, 12));
    }

    #[test]
    fn names() {
        assert_eq!(parse_policy("OCP*"), Ok(Policy::Predictive));
        assert!(parse_policy("ocp").is_err());
        assert_eq!(parse_predictor("noisy-oracle"), Ok(PredictorKind::NoisyOracle));
    }
}
