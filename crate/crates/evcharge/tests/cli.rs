use std::path::Path;
use std::process::{Command, Output};

use evcharge::io;
use evcharge_core::assignment::sample_instance;
use evcharge_core::metrics::MetricsReport;
use evcharge_core::rng;

const SMALL: [&str; 6] = ["--fleet-size", "6", "--customers", "80", "--training-days", "2"];

fn evcharge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evcharge"))
        .current_dir(dir)
        .args(args)
        .args(SMALL)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn demand_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(&evcharge(dir.path(), &["generate-demand", "--seed", "9", "--out", "a.csv", "--exogenous-out", "ax.csv"]));
    ok(&evcharge(dir.path(), &["generate-demand", "--seed", "9", "--out", "b.csv", "--exogenous-out", "bx.csv"]));
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("ax.csv"), read("bx.csv"));
    let requests = io::read_requests(io::open(&dir.path().join("a.csv")).unwrap()).unwrap();
    assert_eq!(requests.len(), 80);
}

#[test]
fn simulated_trace_verifies_and_reproduces_its_metrics() {
    let dir = tempfile::tempdir().unwrap();
    ok(&evcharge(dir.path(), &["generate-demand", "--seed", "4", "--out", "req.csv", "--exogenous-out", "exo.csv"]));
    ok(&evcharge(dir.path(), &["plan", "--seed", "4", "--out", "plans.csv"]));
    for policy in ["NP", "OCP0", "OCP*"] {
        let out = evcharge(
            dir.path(),
            &[
                "simulate", "--seed", "4", "--policy", policy, "--requests", "req.csv", "--exogenous", "exo.csv",
                "--plans", "plans.csv", "--trace-out", "trace.csv", "--metrics-out", "metrics.csv",
            ],
        );
        ok(&out);
        ok(&evcharge(dir.path(), &["verify-trace", "--trace", "trace.csv", "--metrics", "metrics.csv"]));

        let trace = io::read_trace(io::open(&dir.path().join("trace.csv")).unwrap()).unwrap();
        let rows = io::read_metrics_long(io::open(&dir.path().join("metrics.csv")).unwrap()).unwrap();
        let written = |name: &str| rows.iter().find(|r| r.metric == name).map(|r| r.value).unwrap();
        let again = MetricsReport::from_trace(&trace, written("plan_cost"));
        for (name, value) in again.named() {
            assert!((value - written(name)).abs() < 1e-9, "{policy} {name}: {value} vs {}", written(name));
        }
    }
}

#[test]
fn tampered_trace_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    ok(&evcharge(dir.path(), &["simulate", "--seed", "2", "--policy", "NP", "--trace-out", "trace.csv"]));
    let path = dir.path().join("trace.csv");
    let mut rows = io::read_trace(io::open(&path).unwrap()).unwrap();
    let energy = rows
        .iter_mut()
        .find_map(|r| r.energy.as_mut().filter(|e| **e > 0.0))
        .expect("some charging");
    *energy += 1.0;
    io::write_trace(io::create(&path).unwrap(), &rows).unwrap();
    let out = evcharge(dir.path(), &["verify-trace", "--trace", "trace.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn assignment_instance_is_solved_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let inst = sample_instance(&mut rng::stream(5, 0), 4, 6);
    io::write_instance(io::create(&dir.path().join("inst.csv")).unwrap(), &inst).unwrap();
    ok(&evcharge(dir.path(), &["assign", "--instance", "inst.csv", "--out", "sol.csv"]));
    ok(&evcharge(dir.path(), &["assign", "--instance", "inst.csv", "--solution", "sol.csv"]));
    let sol = io::read_solution(io::open(&dir.path().join("sol.csv")).unwrap(), &inst).unwrap();
    assert_eq!(sol.pairs().len(), 4);
}

#[test]
fn compare_writes_long_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = evcharge(dir.path(), &["compare", "--seeds", "1,2", "--threads", "2", "--out-dir", "cmp"]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("OCP* vs. NP"));
    let files: Vec<_> = std::fs::read_dir(dir.path().join("cmp")).unwrap().collect();
    assert!(!files.is_empty());
}

#[test]
fn bad_configuration_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = evcharge(dir.path(), &["simulate", "--policy", "NP", "--e-init", "5"]);
    assert_eq!(out.status.code(), Some(1));
}
