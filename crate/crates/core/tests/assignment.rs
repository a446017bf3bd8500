use evcharge_core::assignment::{
    sample_instance, solve_exact, solve_lagrangian, verify_solution, AssignmentError,
    AssignmentInstance, LagrangianOptions,
};
use evcharge_core::rng;
use proptest::prelude::*;

/// Cheapest complete assignment by brute force over all injective maps.
fn brute_force(inst: &AssignmentInstance) -> Option<f64> {
    fn go(inst: &AssignmentInstance, i: usize, used: &mut Vec<bool>, acc: f64, best: &mut Option<f64>) {
        if i == inst.vehicle_count() {
            if best.map_or(true, |b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for j in 0..inst.charger_count() {
            if used[j] {
                continue;
            }
            if let Some(e) = inst.edge(i, j) {
                used[j] = true;
                go(inst, i + 1, used, acc + e.cost, best);
                used[j] = false;
            }
        }
    }
    let mut best = None;
    go(inst, 0, &mut vec![false; inst.charger_count()], 0.0, &mut best);
    best
}

fn instance(seed: u64, n: usize, m: usize) -> AssignmentInstance {
    sample_instance(&mut rng::stream(seed, 0), n, m.max(n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_is_optimal_and_verified(seed in any::<u64>(), n in 0usize..=5, m in 1usize..=6) {
        let inst = instance(seed, n, m);
        match (solve_exact(&inst), brute_force(&inst)) {
            (Ok(sol), Some(best)) => {
                prop_assert!((sol.objective - best).abs() < 1e-9);
                prop_assert!(verify_solution(&inst, &sol).is_empty());
                prop_assert_eq!(sol.pairs().len(), inst.vehicle_count());
            }
            (Err(AssignmentError::Infeasible { blocked }), None) => prop_assert!(!blocked.is_empty()),
            (a, b) => prop_assert!(false, "exact {:?} vs brute force {:?}", a, b),
        }
    }

    #[test]
    fn lagrangian_is_feasible_and_bounded_by_exact(seed in any::<u64>(), n in 0usize..=6, m in 1usize..=6) {
        let inst = instance(seed, n, m);
        let lag = solve_lagrangian(&inst, &LagrangianOptions::default());
        match (solve_exact(&inst), lag) {
            (Ok(ex), Ok(lg)) => {
                prop_assert!(verify_solution(&inst, &lg).is_empty());
                prop_assert!(lg.objective >= ex.objective - 1e-9);
            }
            (Err(AssignmentError::Infeasible { .. }), Err(AssignmentError::Infeasible { .. })) => {}
            (a, b) => prop_assert!(false, "exact {:?} vs lagrangian {:?}", a, b),
        }
    }
}

#[test]
fn lagrangian_close_to_exact_on_most_instances() {
    let mut within = 0;
    let mut total = 0;
    for seed in 0..300 {
        let inst = instance(seed, 1 + seed as usize % 6, 6);
        if let (Ok(ex), Ok(lg)) = (solve_exact(&inst), solve_lagrangian(&inst, &LagrangianOptions::default())) {
            total += 1;
            if lg.objective <= ex.objective * 1.02 + 1e-9 {
                within += 1;
            }
        }
    }
    assert!(within as f64 >= 0.95 * total as f64, "{within}/{total}");
}

#[test]
fn full_size_lagrangian_is_verified() {
    for seed in 0..20 {
        let inst = instance(seed, 9, 9);
        if let Ok(sol) = solve_lagrangian(&inst, &LagrangianOptions::default()) {
            assert!(verify_solution(&inst, &sol).is_empty());
        }
    }
}
