use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{shortest_path_raw, Graph, NodeId};
use crate::scalar::{approx_eq, cmp_scalar, Scalar};
use crate::uncertainty::{worst_case_value, UncertaintyModel};

use super::{check_instance, finish, Best, Diagnostics, RobustSolution};

/// Budgeted uncertainty by threshold enumeration.
///
/// For a fixed path the worst-case deviation is an LP whose dual is
/// `min_{θ ≥ 0} Γθ + Σ_{i ∈ x} max(d_i − θ, 0)`, a convex piecewise-linear
/// function with breakpoints at the deviations `d_i`. Minimizing over paths
/// and θ together therefore only needs θ ∈ {0} ∪ {d_i}, each one a shortest
/// path with costs `ĉ_i + max(d_i − θ, 0)`. The argument does not use
/// integrality of Γ, so fractional budgets are solved exactly as well.
pub fn solve_budgeted<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
) -> Result<RobustSolution<T>> {
    let started = Instant::now();
    check_instance(graph, model, source, target)?;
    let UncertaintyModel::Budgeted {
        c_hat,
        c_bar,
        gamma,
    } = model
    else {
        return Err(Error::InvalidParameter(format!(
            "budgeted solver given a {} model",
            model.family_name()
        )));
    };
    let gamma = *gamma;
    let devs: Vec<T> = c_bar
        .iter()
        .zip(c_hat.iter())
        .map(|(&b, &h)| (b - h).max(T::zero()))
        .collect();
    let mut thresholds = devs.clone();
    thresholds.push(T::zero());
    thresholds.sort_unstable_by(|a, b| cmp_scalar(*a, *b));
    thresholds.dedup();

    let mut diagnostics = Diagnostics::default();
    let mut best_bound = T::infinity();
    let mut candidates = Vec::new();
    let mut costs = vec![T::zero(); devs.len()];
    for &theta in &thresholds {
        let floor = gamma * theta;
        // subproblem values are at least Γθ, which only grows from here
        if floor > best_bound && !approx_eq(floor, best_bound, T::tie_tolerance()) {
            break;
        }
        for ((c, &h), &d) in costs.iter_mut().zip(c_hat.iter()).zip(&devs) {
            *c = h + (d - theta).max(T::zero());
        }
        diagnostics.subproblems += 1;
        let Some((dist, path)) = shortest_path_raw(graph, &costs, source, target) else {
            return Err(Error::NoPath {
                from: source,
                to: target,
            });
        };
        let value = dist + floor;
        if value < best_bound {
            best_bound = value;
        }
        candidates.push((value, path));
    }

    let mut best = Best::new();
    for (value, path) in &candidates {
        if approx_eq(*value, best_bound, T::tie_tolerance().sqrt()) || *value <= best_bound {
            best.offer(worst_case_value(model, path)?, path);
        }
    }
    let path = best.path.ok_or(Error::NoPath {
        from: source,
        to: target,
    })?;
    finish(model, path, diagnostics, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CostVector;
    use crate::solvers::solve_interval;

    fn model(c_hat: Vec<f64>, c_bar: Vec<f64>, gamma: f64) -> UncertaintyModel<f64> {
        UncertaintyModel::Budgeted {
            c_hat: CostVector::new(c_hat).unwrap(),
            c_bar: CostVector::new(c_bar).unwrap(),
            gamma,
        }
    }

    #[test]
    fn parallel_arcs_prefer_low_deviation() {
        let g = Graph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        let sol = solve_budgeted(&g, &model(vec![1.0, 3.0], vec![6.0, 4.0], 1.0), 0, 1).unwrap();
        assert_eq!(sol.path.arcs(), &[1]);
        assert_eq!(sol.objective, 4.0);
        assert!(sol.diagnostics.subproblems <= 3);
    }

    #[test]
    fn zero_budget_is_nominal() {
        let g = Graph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        let sol = solve_budgeted(&g, &model(vec![1.0, 3.0], vec![6.0, 4.0], 0.0), 0, 1).unwrap();
        assert_eq!(sol.path.arcs(), &[0]);
        assert_eq!(sol.objective, 1.0);
    }

    #[test]
    fn large_budget_matches_upper_bounds() {
        let g = Graph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let m = model(vec![1.0, 2.0, 1.0, 3.0], vec![4.0, 2.5, 2.0, 3.5], 5.0);
        let sol = solve_budgeted(&g, &m, 0, 3).unwrap();
        let upper = UncertaintyModel::Interval {
            lower: CostVector::new(vec![1.0, 2.0, 1.0, 3.0]).unwrap(),
            upper: CostVector::new(vec![4.0, 2.5, 2.0, 3.5]).unwrap(),
            lambda: 1.0,
        };
        let iv = solve_interval(&g, &upper, 0, 3).unwrap();
        assert_eq!(sol.objective, iv.objective);
        assert_eq!(sol.objective, 6.0);
    }

    #[test]
    fn fractional_budget_matches_greedy_evaluation() {
        // path A: deviations 3 and 2 on nominal 2; path B: deviation 4 on nominal 3
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let m = model(vec![1.0, 1.0, 3.0], vec![4.0, 3.0, 7.0], 1.5);
        let sol = solve_budgeted(&g, &m, 0, 2).unwrap();
        // A: 2 + 3 + 0.5·2 = 6, B: 3 + 4 = 7
        assert_eq!(sol.objective, 6.0);
        assert_eq!(sol.path.arcs(), &[0, 1]);
    }
}
