use evcharge_core::demand::{self, ArrivalProfile, DemandConfig, ExogenousConfig};
use evcharge_core::rng;
use evcharge_core::ChargerId;

#[test]
fn arrival_times_follow_the_profile() {
    let profile = ArrivalProfile::commuter(390.0, 1320.0);
    let mut r = rng::stream(42, 0);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n).map(|_| profile.sample(&mut r)).collect();
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = profile.cdf(x);
            (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn party_sizes_match_their_weights() {
    let cfg = DemandConfig {
        customer_count: 100_000,
        party_sizes: vec![0.5, 0.3, 0.2],
        ..DemandConfig::default()
    };
    let reqs = demand::generate(9, &cfg).unwrap();
    for (k, &w) in [0.5, 0.3, 0.2].iter().enumerate() {
        let n = reqs.len() as f64;
        let hits = reqs.iter().filter(|r| r.party_size as usize == k + 1).count() as f64;
        let sd = (n * w * (1.0 - w)).sqrt();
        assert!((hits - n * w).abs() < 3.0 * sd, "size {}: {hits}", k + 1);
    }
    assert!(reqs.iter().all(|r| cfg.region.contains(r.pickup) && cfg.region.contains(r.dropoff)));
    assert!(reqs.windows(2).all(|w| w[0].arrival <= w[1].arrival));
}

#[test]
fn outside_sessions_have_poisson_counts() {
    let cfg = ExogenousConfig::default();
    let chargers: Vec<ChargerId> = (0..9).map(ChargerId).collect();
    let days = 400;
    let mut total = 0usize;
    for day in 0..days {
        total += demand::generate_exogenous(day, &cfg, &chargers).unwrap().len();
    }
    let hours = (cfg.end - cfg.start) / 60.0;
    let mean = cfg.arrivals_per_hour * hours * 9.0 * days as f64;
    assert!((total as f64 - mean).abs() < 3.0 * mean.sqrt(), "{total} vs {mean}");
}

#[test]
fn generation_is_reproducible() {
    let cfg = DemandConfig::default();
    assert_eq!(demand::generate(5, &cfg).unwrap(), demand::generate(5, &cfg).unwrap());
    assert_ne!(demand::generate(5, &cfg).unwrap(), demand::generate(6, &cfg).unwrap());
}
