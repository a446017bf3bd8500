use alloc::vec;
use alloc::vec::Vec;

use super::{
    blocked_vehicles, build_solution, max_matching, AssignmentError, AssignmentInstance,
    AssignmentSolution, Optimality,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianOptions {
    pub iterations: usize,
    /// Stop once (primal - dual) / max(1, |dual|) falls below this.
    pub gap_tolerance: f64,
    pub local_search: bool,
}

impl Default for LagrangianOptions {
    fn default() -> Self {
        Self {
            iterations: 200,
            gap_tolerance: 0.005,
            local_search: true,
        }
    }
}

type Costs = [Vec<Option<f64>>];

/// Relaxes the one-vehicle-per-charger constraints with multipliers
/// `lambda_j >= 0` and runs subgradient ascent with a diminishing step.
/// Every relaxed solution is repaired into a feasible assignment and
/// polished by move/swap local search; the best one is returned with its gap
/// to the best dual bound.
pub fn solve_lagrangian(
    inst: &AssignmentInstance,
    opts: &LagrangianOptions,
) -> Result<AssignmentSolution, AssignmentError> {
    inst.validate()?;
    let n = inst.vehicle_count();
    let m = inst.charger_count();
    if n == 0 {
        return Ok(build_solution(
            inst,
            &[],
            Optimality::Lagrangian {
                gap: 0.0,
                iterations: 0,
            },
        ));
    }
    let costs = inst.cost_table();
    let infeasible = || AssignmentError::Infeasible {
        blocked: blocked_vehicles(inst, &costs),
    };
    if costs.iter().any(|row| row.iter().all(Option::is_none)) {
        return Err(infeasible());
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let consider = |assign: Vec<usize>, best: &mut Option<(f64, Vec<usize>)>| {
        let mut assign = assign;
        if opts.local_search {
            local_search(&costs, m, &mut assign);
        }
        let z = total(&costs, &assign);
        if best.as_ref().map_or(true, |(b, _)| z < *b - 1e-12) {
            *best = Some((z, assign));
        }
    };
    if let Some(a) = greedy(&costs, m) {
        consider(a, &mut best);
    } else {
        let matched = max_matching(&costs, m);
        if matched.iter().any(Option::is_none) {
            return Err(infeasible());
        }
        consider(matched.into_iter().map(|j| j.unwrap_or(0)).collect(), &mut best);
    }
    let initial = best.as_ref().map(|(z, _)| *z).unwrap_or(0.0);

    let mut lambda = vec![0.0; m];
    let mut best_dual = f64::NEG_INFINITY;
    let mut base_step: Option<f64> = None;
    let mut iterations = 0;
    let gap = |primal: f64, dual: f64| (primal - dual).max(0.0) / dual.abs().max(1.0);
    for k in 1..=opts.iterations {
        iterations = k;
        let choice: Vec<usize> = (0..n)
            .map(|i| {
                let mut arg = usize::MAX;
                let mut val = f64::INFINITY;
                for j in 0..m {
                    if let Some(c) = costs[i][j] {
                        if c + lambda[j] < val {
                            val = c + lambda[j];
                            arg = j;
                        }
                    }
                }
                arg
            })
            .collect();
        let dual: f64 = choice
            .iter()
            .enumerate()
            .map(|(i, &j)| costs[i][j].unwrap_or(0.0) + lambda[j])
            .sum::<f64>()
            - lambda.iter().sum::<f64>();
        best_dual = best_dual.max(dual);

        let mut load = vec![0i32; m];
        for &j in &choice {
            load[j] += 1;
        }
        if let Some(a) = repair(&costs, &lambda, &choice, m) {
            consider(a, &mut best);
        }
        let primal = best.as_ref().map(|(z, _)| *z).unwrap_or(f64::INFINITY);
        if gap(primal, best_dual) < opts.gap_tolerance {
            break;
        }

        let subgrad: Vec<f64> = load.iter().map(|&l| (l - 1) as f64).collect();
        let norm2: f64 = subgrad.iter().map(|g| g * g).sum();
        if norm2 == 0.0 {
            break;
        }
        let s0 = *base_step.get_or_insert_with(|| (initial - dual) / norm2);
        if !(s0 > 0.0) {
            break;
        }
        let step = s0 / k as f64;
        for j in 0..m {
            lambda[j] = (lambda[j] + step * subgrad[j]).max(0.0);
        }
    }

    let (_, assign) = best.ok_or_else(infeasible)?;
    let mut sol = build_solution(
        inst,
        &assign,
        Optimality::Lagrangian {
            gap: 0.0,
            iterations,
        },
    );
    if let Optimality::Lagrangian { gap: g, .. } = &mut sol.optimality {
        *g = gap(sol.objective, best_dual);
    }
    Ok(sol)
}

fn total(costs: &Costs, assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i][j].expect("feasible pair"))
        .sum()
}

/// Cheapest feasible pair first, repeatedly.
fn greedy(costs: &Costs, m: usize) -> Option<Vec<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = costs
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(j, c)| c.map(|c| (c, i, j)))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![usize::MAX; costs.len()];
    let mut used = vec![false; m];
    for (_, i, j) in pairs {
        if assign[i] == usize::MAX && !used[j] {
            assign[i] = j;
            used[j] = true;
        }
    }
    assign.iter().all(|&j| j != usize::MAX).then_some(assign)
}

/// On every over-subscribed charger the vehicle with the largest regret
/// (second-best minus best reduced cost) stays; the others move, largest
/// regret first, to their cheapest free charger.
fn repair(costs: &Costs, lambda: &[f64], choice: &[usize], m: usize) -> Option<Vec<usize>> {
    let n = choice.len();
    let regret: Vec<f64> = (0..n)
        .map(|i| {
            let mut reduced: Vec<f64> = (0..m)
                .filter_map(|j| costs[i][j].map(|c| c + lambda[j]))
                .collect();
            reduced.sort_by(f64::total_cmp);
            match reduced.as_slice() {
                [a, b, ..] => b - a,
                _ => f64::INFINITY,
            }
        })
        .collect();
    let mut holder: Vec<Option<usize>> = vec![None; m];
    for i in 0..n {
        let j = choice[i];
        match holder[j] {
            Some(h) if regret[h] >= regret[i] => {}
            _ => holder[j] = Some(i),
        }
    }
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; m];
    for (j, h) in holder.iter().enumerate() {
        if let Some(i) = h {
            assign[*i] = j;
            used[j] = true;
        }
    }
    let mut displaced: Vec<usize> = (0..n).filter(|&i| assign[i] == usize::MAX).collect();
    displaced.sort_by(|&a, &b| regret[b].total_cmp(&regret[a]).then(a.cmp(&b)));
    for i in displaced {
        let j = (0..m)
            .filter(|&j| !used[j])
            .filter_map(|j| costs[i][j].map(|c| (c, j)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?
            .1;
        assign[i] = j;
        used[j] = true;
    }
    Some(assign)
}

/// First-improvement moves to free chargers and pairwise swaps.
fn local_search(costs: &Costs, m: usize, assign: &mut [usize]) {
    let n = assign.len();
    let mut used = vec![false; m];
    for &j in assign.iter() {
        used[j] = true;
    }
    for _ in 0..1000 {
        let mut improved = false;
        for i in 0..n {
            let cur = costs[i][assign[i]].unwrap_or(f64::INFINITY);
            for j in 0..m {
                if used[j] {
                    continue;
                }
                if let Some(c) = costs[i][j] {
                    if c < cur - 1e-12 {
                        used[assign[i]] = false;
                        used[j] = true;
                        assign[i] = j;
                        improved = true;
                        break;
                    }
                }
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                let (ja, jb) = (assign[a], assign[b]);
                let (Some(ab), Some(ba)) = (costs[a][jb], costs[b][ja]) else {
                    continue;
                };
                let now = costs[a][ja].unwrap_or(f64::INFINITY) + costs[b][jb].unwrap_or(f64::INFINITY);
                if ab + ba < now - 1e-12 {
                    assign.swap(a, b);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}
