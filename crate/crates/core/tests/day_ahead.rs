use evcharge_core::day_ahead::oracle::{sample_on_grid, solve_by_enumeration};
use evcharge_core::day_ahead::{check_plan, solve_vehicle, ChargeLimits, PlanError};
use evcharge_core::rng;
use proptest::prelude::*;

fn limits(u_max: f64) -> ChargeLimits {
    ChargeLimits {
        e_min: 12.4,
        e_max: 49.6,
        u_max,
        big_m: u_max,
        soc_step: 0.1,
    }
}

fn same_outcome(seed: u64, epochs: usize, u_max: f64, full: bool) {
    let lim = limits(u_max);
    let (mut profile, prices) = sample_on_grid(&mut rng::stream(seed, 0), epochs, &lim);
    if full {
        profile.e_init = 62.0;
    }
    match (solve_vehicle(&profile, &prices, &lim), solve_by_enumeration(&profile, &prices, &lim)) {
        (Ok(dp), Ok(en)) => {
            assert!((dp.cost - en.cost).abs() < 1e-6, "dp {} vs enumeration {}", dp.cost, en.cost);
            assert!(check_plan(&dp, &profile, &prices, &lim).is_empty());
            assert!(check_plan(&en, &profile, &prices, &lim).is_empty());
        }
        (Err(PlanError::Infeasible { .. }), Err(PlanError::Infeasible { .. })) => {}
        (a, b) => panic!("solvers disagree: {a:?} vs {b:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dp_matches_enumeration(seed in any::<u64>(), epochs in 1usize..=8, u in 5u32..=25, full in any::<bool>()) {
        same_outcome(seed, epochs, f64::from(u), full);
    }
}

#[test]
fn long_horizon_is_refused_by_enumeration() {
    let lim = limits(25.0);
    let (profile, prices) = sample_on_grid(&mut rng::stream(1, 0), 13, &lim);
    assert!(matches!(
        solve_by_enumeration(&profile, &prices, &lim),
        Err(PlanError::TooLarge { .. })
    ));
}
