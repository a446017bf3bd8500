//! Runs NP, OCP0 and OCP* on the same demand and outside charging sessions
//! for several seeds and summarises the differences.

use std::fmt::Write as _;
use std::time::Instant;

use evcharge_core::metrics::{MetricDeltas, MetricsReport, DELTA_ROWS, REFERENCE};
use evcharge_core::pipeline::{self, DayData, PipelineError, Prepared};
use evcharge_core::scenario::Policy;
use evcharge_core::sim::trace::{energy_residuals, exclusivity_violations};
use evcharge_core::sim::SimOutcome;
use evcharge_core::ScenarioConfig;

use crate::io::MetricRow;

/// One policy on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub seed: u64,
    pub policy: Policy,
    pub report: MetricsReport,
    pub trace_hash: u64,
    pub seconds: f64,
    pub soft_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    /// Sorted by (seed, policy).
    pub runs: Vec<PolicyRun>,
    pub failures: Vec<SeedFailure>,
}

/// Hard checks every simulated day must pass.
pub fn invariant_faults(cfg: &ScenarioConfig, out: &SimOutcome) -> Vec<String> {
    let mut faults = Vec::new();
    let overlaps = exclusivity_violations(&out.trace);
    if !overlaps.is_empty() {
        faults.push(format!("{} overlapping charger sessions", overlaps.len()));
    }
    let e_init = vec![cfg.vehicle.e_init; cfg.fleet_size];
    for (v, r) in energy_residuals(&out.trace, &e_init, cfg.vehicle.consumption_rate)
        .into_iter()
        .enumerate()
    {
        if !(r.abs() <= 1e-6) {
            faults.push(format!("vehicle {v} energy balance off by {r:e} kWh"));
        }
    }
    faults
}

/// Output of one seed: the shared day, the plans, and each policy's run.
pub struct SeedOutcome {
    pub seed: u64,
    pub day: DayData,
    pub prepared: Prepared,
    pub outcomes: Vec<(Policy, SimOutcome, MetricsReport, f64)>,
}

pub fn run_seed(cfg: &ScenarioConfig, seed: u64) -> Result<SeedOutcome, String> {
    let cfg = ScenarioConfig { seed, ..cfg.clone() };
    let err = |e: PipelineError| e.to_string();
    let prepared = pipeline::prepare(&cfg).map_err(err)?;
    let day = pipeline::test_day(&cfg).map_err(err)?;
    let mut outcomes = Vec::new();
    for policy in Policy::ALL {
        let t = Instant::now();
        let (out, report) = pipeline::run_policy(&cfg, policy, &day, &prepared).map_err(err)?;
        let seconds = t.elapsed().as_secs_f64();
        let faults = invariant_faults(&cfg, &out);
        if !faults.is_empty() {
            return Err(format!("{policy}: {}", faults.join("; ")));
        }
        outcomes.push((policy, out, report, seconds));
    }
    Ok(SeedOutcome {
        seed,
        day,
        prepared,
        outcomes,
    })
}

/// Runs every seed, `threads` at a time. Results do not depend on the
/// thread count.
pub fn run_compare(cfg: &ScenarioConfig, seeds: &[u64], threads: usize) -> CompareReport {
    let threads = threads.clamp(1, seeds.len().max(1));
    let mut results: Vec<(u64, Result<Vec<PolicyRun>, String>)> = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(threads) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| {
                    s.spawn(move || {
                        let runs = run_seed(cfg, seed).map(|o| {
                            o.outcomes
                                .into_iter()
                                .map(|(policy, out, report, seconds)| PolicyRun {
                                    seed,
                                    policy,
                                    report,
                                    trace_hash: out.trace_hash(),
                                    seconds,
                                    soft_violations: out.soft_violations.len(),
                                })
                                .collect()
                        });
                        (seed, runs)
                    })
                })
                .collect();
            for (&seed, h) in chunk.iter().zip(handles) {
                results.push(h.join().unwrap_or_else(|_| (seed, Err("simulation panicked".into()))));
            }
        });
    }
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(mut rs) => runs.append(&mut rs),
            Err(message) => failures.push(SeedFailure { seed, message }),
        }
    }
    runs.sort_by_key(|r| (r.seed, r.policy));
    failures.sort_by_key(|f| f.seed);
    CompareReport {
        seeds: seeds.to_vec(),
        runs,
        failures,
    }
}

impl CompareReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// Seeds where every policy finished.
    pub fn complete_seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self
            .seeds
            .iter()
            .copied()
            .filter(|s| Policy::ALL.iter().all(|p| self.runs.iter().any(|r| r.seed == *s && r.policy == *p)))
            .collect();
        seeds.dedup();
        seeds
    }

    /// Mean report of one policy over the complete seeds.
    pub fn mean(&self, policy: Policy) -> MetricsReport {
        let seeds = self.complete_seeds();
        let reports: Vec<MetricsReport> = self
            .runs
            .iter()
            .filter(|r| r.policy == policy && seeds.contains(&r.seed))
            .map(|r| r.report)
            .collect();
        MetricsReport::mean(&reports)
    }

    pub fn deltas(&self) -> Vec<(&'static str, MetricDeltas)> {
        DELTA_ROWS
            .iter()
            .map(|&(label, new, base)| (label, MetricDeltas::between(&self.mean(new), &self.mean(base))))
            .collect()
    }

    pub fn slowest_run(&self) -> f64 {
        self.runs.iter().map(|r| r.seconds).fold(0.0, f64::max)
    }

    /// Long-format rows: every metric of every run.
    pub fn long_rows(&self) -> Vec<MetricRow> {
        self.runs
            .iter()
            .flat_map(|r| {
                r.report.named().into_iter().map(move |(metric, value)| MetricRow {
                    policy: r.policy.label().to_string(),
                    metric: metric.to_string(),
                    seed: r.seed,
                    value,
                })
            })
            .collect()
    }

    /// Human-readable summary table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds: {}", seeds.join(", "));
        if self.is_partial() {
            let _ = writeln!(s, "PARTIAL REPORT");
            for f in &self.failures {
                let _ = writeln!(s, "  seed {} failed: {}", f.seed, f.message);
            }
        }
        let _ = writeln!(
            s,
            "\n{:<16}{:>9}{:>9}{:>9}{:>9}{:>9}{:>10}{:>9}{:>9}",
            "policy", "ACWT", "ACT", "AOTC", "TWT", "TCT", "TCE", "served", "rejected"
        );
        for p in Policy::ALL {
            let m = self.mean(p);
            let _ = writeln!(
                s,
                "{:<16}{:>9.1}{:>9.1}{:>9.1}{:>9.2}{:>9.2}{:>10.1}{:>9}{:>9}",
                p.label(),
                m.acwt,
                m.act,
                m.aotc,
                m.twt,
                m.tct,
                m.tce,
                m.served,
                m.rejected
            );
        }
        for (label, d) in self.deltas() {
            let cells: String = d
                .named()
                .iter()
                .enumerate()
                .map(|(k, (_, v))| if k == 5 { format!("{v:>9.1}%") } else { format!("{v:>8.1}%") })
                .collect();
            let _ = writeln!(s, "{label:<16}{cells}");
        }
        let _ = writeln!(s, "\nreference figures:");
        for (p, v) in REFERENCE {
            let _ = writeln!(
                s,
                "{:<16}{:>9.1}{:>9.1}{:>9.1}{:>9.1}{:>9.1}{:>10.1}",
                p.label(),
                v[0],
                v[1],
                v[2],
                v[3],
                v[4],
                v[5]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            fleet_size: 8,
            training_days: 2,
            ..ScenarioConfig::default()
        };
        cfg.demand.customer_count = 120;
        cfg
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = small();
        let a = run_compare(&cfg, &[1, 2, 3], 1);
        let b = run_compare(&cfg, &[1, 2, 3], 3);
        assert!(!a.is_partial());
        let strip = |r: &CompareReport| -> Vec<(u64, Policy, u64, MetricsReport)> {
            r.runs.iter().map(|x| (x.seed, x.policy, x.trace_hash, x.report)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.runs.len(), 9);
        assert_eq!(a.long_rows().len(), 90);
    }

    #[test]
    fn a_failing_seed_marks_the_report_partial() {
        let mut cfg = small();
        cfg.vehicle.e_init = 1.0;
        let r = run_compare(&cfg, &[4], 1);
        assert!(r.is_partial());
        assert_eq!(r.failures[0].seed, 4);
        assert!(r.render().contains("PARTIAL"));
        assert_eq!(r.mean(Policy::NeedBased), MetricsReport::default());
    }
}
