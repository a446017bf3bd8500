use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use evcharge::compare::{self, run_compare};
use evcharge::config::{parse_policy, Overrides};
use evcharge::evaluate;
use evcharge::io::{self, MetricRow};
use evcharge_core::assignment::{self, verify_solution, LagrangianOptions, EXACT_LIMIT};
use evcharge_core::day_ahead::{self, check_plan};
use evcharge_core::metrics::{self, MetricsReport};
use evcharge_core::pipeline::{self, DayData, Prepared};
use evcharge_core::scenario::{Policy, PredictorKind};
use evcharge_core::sim::trace::{energy_residuals, exclusivity_violations};
use evcharge_core::ScenarioConfig;

#[derive(Parser)]
#[command(name = "evcharge", version, about = "Charging policies for electric ride-hailing fleets")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seed's ride requests and outside charging sessions.
    GenerateDemand {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        exogenous_out: Option<PathBuf>,
    },
    /// Average per-epoch consumption logs into a profile table.
    ExtractProfiles {
        /// Consumption logs of need-based runs. Without any, the configured
        /// number of need-based training days is simulated.
        #[arg(long, num_args = 1..)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the day-ahead charging plans.
    Plan {
        /// Consumption profile table; simulated training days when absent.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one day under one policy.
    Simulate {
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        /// Request file; generated from the seed when absent.
        #[arg(long)]
        requests: Option<PathBuf>,
        #[arg(long)]
        exogenous: Option<PathBuf>,
        /// Plan file; solved from simulated training days when absent.
        #[arg(long)]
        plans: Option<PathBuf>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        visits_out: Option<PathBuf>,
        #[arg(long)]
        consumption_out: Option<PathBuf>,
        #[arg(long)]
        sessions_out: Option<PathBuf>,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Run NP, OCP0 and OCP* over several seeds and report the differences.
    Compare {
        /// Comma-separated seeds or an inclusive range like 1..5.
        #[arg(long, default_value = "1..5")]
        seeds: String,
        #[arg(long, default_value_t = 4)]
        threads: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check an exported trace and recompute its metrics.
    VerifyTrace {
        #[arg(long)]
        trace: PathBuf,
        /// Long-format metrics written with the trace, to compare against.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Score an occupancy forecast minute by minute.
    PredictEval {
        /// Session file; synthetic outside sessions when absent.
        #[arg(long)]
        sessions: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        minutes: usize,
        #[arg(long, default_value_t = 1)]
        chargers: usize,
        /// Days of a session file used to build the historical profile; the
        /// remaining days are scored.
        #[arg(long, default_value_t = 28)]
        train_days: usize,
    },
    /// Solve or check a single assignment instance file.
    Assign {
        #[arg(long)]
        instance: PathBuf,
        /// Write the solution here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check this solution instead of solving.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn header(cfg: &ScenarioConfig) {
    println!(
        "seed {} | fleet {} | customers {} | chargers {} | predictor {:?}",
        cfg.seed,
        cfg.fleet_size,
        cfg.demand.customer_count,
        cfg.chargers.len(),
        cfg.predictor.kind
    );
}

/// Returns whether every check passed.
fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::GenerateDemand { out, exogenous_out } => {
            header(&cfg);
            let day = pipeline::test_day(&cfg)?;
            io::write_requests(io::create(&out)?, &day.requests)?;
            println!("{} requests -> {}", day.requests.len(), out.display());
            if let Some(p) = exogenous_out {
                io::write_exogenous(io::create(&p)?, &day.exogenous)?;
                println!("{} outside sessions -> {}", day.exogenous.len(), p.display());
            }
            Ok(true)
        }
        Command::ExtractProfiles { logs, out } => {
            header(&cfg);
            let tables = if logs.is_empty() {
                pipeline::training_logs(&cfg)?
            } else {
                logs.iter()
                    .map(|p| Ok(io::read_consumption(io::open(p)?)?))
                    .collect::<Result<Vec<_>>>()?
            };
            let mean = metrics::mean_consumption(&tables)?;
            io::write_consumption(io::create(&out)?, &mean)?;
            println!("profiles of {} vehicles from {} runs -> {}", mean.len(), tables.len(), out.display());
            Ok(true)
        }
        Command::Plan { profiles, out } => {
            header(&cfg);
            let logs = match profiles {
                Some(p) => vec![io::read_consumption(io::open(&p)?)?],
                None => pipeline::training_logs(&cfg)?,
            };
            let profiles = pipeline::profiles_from_logs(&cfg, &logs)?;
            let plans = pipeline::plan(&cfg, &profiles)?;
            let prices = cfg.price_schedule()?;
            let limits = cfg.charge_limits();
            let faults: usize = plans
                .iter()
                .zip(&profiles)
                .map(|(p, prof)| check_plan(p, prof, &prices, &limits).len())
                .sum();
            io::write_plans(io::create(&out)?, &plans)?;
            println!(
                "{} plans, {} charging epochs, cost {:.2} -> {}",
                plans.len(),
                plans.iter().map(|p| p.charge_count()).sum::<usize>(),
                day_ahead::fleet_cost(&plans),
                out.display()
            );
            if faults > 0 {
                eprintln!("{faults} plan constraint violations");
            }
            Ok(faults == 0)
        }
        Command::Simulate {
            policy,
            requests,
            exogenous,
            plans,
            trace_out,
            visits_out,
            consumption_out,
            sessions_out,
            metrics_out,
        } => {
            header(&cfg);
            let generated = pipeline::test_day(&cfg)?;
            let day = DayData {
                requests: match &requests {
                    Some(p) => io::read_requests(io::open(p)?)?,
                    None => generated.requests,
                },
                exogenous: match &exogenous {
                    Some(p) => io::read_exogenous(io::open(p)?)?,
                    None => generated.exogenous,
                },
            };
            let prepared = prepare_for(&cfg, policy, plans.as_deref())?;
            let (out, report) = pipeline::run_policy(&cfg, policy, &day, &prepared)?;
            print_report(policy, &report);
            println!(
                "trace hash {:016x} | soft violations {}",
                out.trace_hash(),
                out.soft_violations.len()
            );
            if let Some(p) = trace_out {
                io::write_trace(io::create(&p)?, &out.trace)?;
            }
            if let Some(p) = visits_out {
                io::write_visits(io::create(&p)?, &out.visits)?;
            }
            if let Some(p) = consumption_out {
                io::write_consumption(io::create(&p)?, &out.consumption)?;
            }
            if let Some(p) = sessions_out {
                io::write_sessions(io::create(&p)?, &out.session_records(), cfg.calendar_day)?;
            }
            if let Some(p) = metrics_out {
                io::write_metrics_long(io::create(&p)?, &long_rows(policy, cfg.seed, &report))?;
            }
            let faults = compare::invariant_faults(&cfg, &out);
            for f in &faults {
                eprintln!("invariant violated: {f}");
            }
            Ok(faults.is_empty())
        }
        Command::Compare {
            seeds,
            threads,
            out_dir,
        } => {
            let seeds = parse_seeds(&seeds)?;
            header(&cfg);
            let report = run_compare(&cfg, &seeds, threads);
            let text = report.render();
            print!("{text}");
            println!("slowest day: {:.2} s", report.slowest_run());
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("report.txt"), &text)?;
                io::write_metrics_long(io::create(&dir.join("metrics_long.csv"))?, &report.long_rows())?;
                println!("report -> {}", dir.display());
            }
            Ok(!report.is_partial())
        }
        Command::VerifyTrace { trace, metrics } => {
            let rows = io::read_trace(io::open(&trace)?)?;
            let mut ok = true;
            let overlaps = exclusivity_violations(&rows);
            if !overlaps.is_empty() {
                ok = false;
                println!("charger exclusivity: {} overlaps", overlaps.len());
            }
            let e_init = vec![cfg.vehicle.e_init; cfg.fleet_size];
            let worst = energy_residuals(&rows, &e_init, cfg.vehicle.consumption_rate)
                .into_iter()
                .fold(0.0_f64, |a, r| a.max(r.abs()));
            if !(worst <= 1e-6) {
                ok = false;
            }
            println!("largest energy residual: {worst:e} kWh");
            let report = MetricsReport::from_trace(&rows, 0.0);
            print_report_row("trace", &report);
            if let Some(p) = metrics {
                let stored = io::read_metrics_long(io::open(&p)?)?;
                for (name, value) in report.named() {
                    if name == "plan_cost" {
                        continue;
                    }
                    if let Some(s) = stored.iter().find(|r| r.metric == name) {
                        if s.value != value {
                            ok = false;
                            println!("{name}: trace gives {value}, metrics file has {}", s.value);
                        }
                    }
                }
            }
            println!("{}", if ok { "trace OK" } else { "trace FAILED" });
            Ok(ok)
        }
        Command::PredictEval {
            sessions,
            minutes,
            chargers,
            train_days,
        } => {
            match sessions {
                None => {
                    header(&cfg);
                    let records = evaluate::synthetic_sessions(cfg.seed, &cfg.exogenous, chargers, minutes);
                    let a = evaluate::noisy_oracle_accuracy(
                        &records,
                        chargers,
                        cfg.predictor.flip_probability,
                        cfg.seed,
                        minutes,
                    )?;
                    println!(
                        "noisy oracle p={}: accuracy {:.4} over {} minutes",
                        cfg.predictor.flip_probability,
                        a.value(),
                        a.minutes
                    );
                }
                Some(path) => {
                    let (records, ingest) = io::read_sessions(io::open(&path)?)?;
                    println!(
                        "{} rows, {} accepted, {} merged, {} rejected",
                        ingest.rows,
                        ingest.accepted,
                        ingest.merged,
                        ingest.rejected.len()
                    );
                    let Some(first) = records.iter().map(|r| (r.start / 1440.0).floor() as i64).min() else {
                        bail!("no usable sessions in {}", path.display());
                    };
                    let last = records.iter().map(|r| (r.end / 1440.0).floor() as i64).max().unwrap_or(first);
                    let n = records.iter().map(|r| r.charger.index() + 1).max().unwrap_or(0);
                    let train: Vec<i64> = (first..(first + train_days as i64).min(last + 1)).collect();
                    let test: Vec<i64> = (first + train_days as i64..=last).collect();
                    if test.is_empty() {
                        bail!("need more than {train_days} days of sessions to score the profile");
                    }
                    let a = evaluate::historical_accuracy(
                        &records,
                        n,
                        &train,
                        &test,
                        cfg.predictor.profile_threshold,
                    )?;
                    println!(
                        "historical profile ({} training days): accuracy {:.4} over {} charger-minutes",
                        train.len(),
                        a.value(),
                        a.minutes
                    );
                }
            }
            Ok(true)
        }
        Command::Assign {
            instance,
            out,
            solution,
        } => {
            let inst = io::read_instance(io::open(&instance)?)?;
            let sol = match solution {
                Some(p) => io::read_solution(io::open(&p)?, &inst)?,
                None => {
                    let sol = if inst.vehicle_count() <= EXACT_LIMIT && inst.charger_count() <= EXACT_LIMIT {
                        assignment::solve_exact(&inst)?
                    } else {
                        assignment::solve_lagrangian(&inst, &LagrangianOptions::default())?
                    };
                    println!("objective {:.6} ({:?})", sol.objective, sol.optimality);
                    sol
                }
            };
            if let Some(p) = out {
                io::write_solution(io::create(&p)?, &inst, &sol)?;
            }
            let violations = verify_solution(&inst, &sol);
            for v in &violations {
                println!("{v:?}");
            }
            println!("{} constraint violations", violations.len());
            Ok(violations.is_empty())
        }
    }
}

fn prepare_for(cfg: &ScenarioConfig, policy: Policy, plans: Option<&Path>) -> Result<Prepared> {
    let history = match (policy, cfg.predictor.kind) {
        (Policy::Predictive, PredictorKind::HistoricalProfile) => Some(pipeline::history(cfg)?),
        _ => None,
    };
    if !policy.uses_plan() {
        return Ok(Prepared {
            plans: Vec::new(),
            plan_cost: 0.0,
            history,
        });
    }
    match plans {
        Some(p) => {
            let plans = io::read_plans(io::open(p)?, &cfg.price_schedule()?)
                .with_context(|| format!("reading {}", p.display()))?;
            Ok(Prepared {
                plan_cost: day_ahead::fleet_cost(&plans),
                plans,
                history,
            })
        }
        None => Ok(pipeline::prepare(cfg)?),
    }
}

fn long_rows(policy: Policy, seed: u64, r: &MetricsReport) -> Vec<MetricRow> {
    r.named()
        .into_iter()
        .map(|(metric, value)| MetricRow {
            policy: policy.label().to_string(),
            metric: metric.to_string(),
            seed,
            value,
        })
        .collect()
}

fn print_report_row(label: &str, r: &MetricsReport) {
    println!(
        "{label:<8} ACWT {:.1} | ACT {:.1} | AOTC {:.1} | TWT {:.2} h | TCT {:.2} h | TCE {:.1} kWh | served {} | rejected {}",
        r.acwt, r.act, r.aotc, r.twt, r.tct, r.tce, r.served, r.rejected
    );
}

fn print_report(policy: Policy, r: &MetricsReport) {
    print_report_row(policy.label(), r);
    if policy.uses_plan() {
        println!("plan cost {:.2}", r.plan_cost);
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("at least one seed is needed");
    }
    Ok(seeds)
}
