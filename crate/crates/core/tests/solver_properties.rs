mod common;

use std::sync::Arc;

use common::{random_instance, rel_close};
use robust_paths::scenario::ScenarioMatrix as Matrix;
use robust_paths::solvers::{solve_budgeted, solve_owa};
use robust_paths::uncertainty::mean_scenario;
use robust_paths::{
    shortest_path, solve, worst_case_value, Family, SolverConfig, UncertaintyModel,
};

#[test]
fn pruning_does_not_change_owa_answers() {
    let on = SolverConfig::default();
    let off = SolverConfig {
        pruning: false,
        ..SolverConfig::default()
    };
    for seed in 0..300 {
        let inst = random_instance(seed);
        let train = Arc::new(inst.scenarios.clone());
        let n = train.scenario_count();
        let mut models = vec![
            UncertaintyModel::convex_hull(&train, 1.0).unwrap(),
            UncertaintyModel::convex_hull(&train, 2.0).unwrap(),
        ];
        for j in 1..=n {
            models.push(UncertaintyModel::permutohull(train.clone(), j).unwrap());
        }
        for k in 1..=n / 2 + 1 {
            models.push(UncertaintyModel::symmetric_permutohull(train.clone(), k).unwrap());
        }
        for m in &models {
            let a = solve_owa(&inst.graph, m, inst.source, inst.target, &on).unwrap();
            let b = solve_owa(&inst.graph, m, inst.source, inst.target, &off).unwrap();
            assert!(rel_close(a.objective, b.objective, 1e-9), "seed {seed}");
            assert_eq!(a.path, b.path, "seed {seed}");
        }
    }
}

#[test]
fn reported_objective_is_the_path_worst_case() {
    let cfg = SolverConfig::default();
    for seed in 0..100 {
        let inst = random_instance(seed);
        let train = Arc::new(inst.scenarios.clone());
        for family in Family::ALL {
            let model = family.build(&train, 1.0).unwrap();
            let sol = solve(&inst.graph, &model, inst.source, inst.target, &cfg).unwrap();
            let again = worst_case_value(&model, &sol.path).unwrap();
            assert!(rel_close(sol.objective, again, 1e-9));
            // repeated solves give bit-identical paths
            let twice = solve(&inst.graph, &model, inst.source, inst.target, &cfg).unwrap();
            assert_eq!(twice.path, sol.path);
            assert_eq!(twice.objective.to_bits(), sol.objective.to_bits());
        }
    }
}

#[test]
fn budgeted_uses_at_most_arcs_plus_one_subproblems() {
    for seed in 0..300 {
        let inst = random_instance(seed);
        for gamma in [0.0, 1.0, 2.5, 100.0] {
            let model = UncertaintyModel::budgeted(&inst.scenarios, gamma).unwrap();
            let sol = solve_budgeted(&inst.graph, &model, inst.source, inst.target).unwrap();
            assert!(sol.diagnostics.subproblems <= inst.graph.arc_count() + 1);
        }
    }
}

/// Optimal values along a parameter sequence of increasing conservatism.
fn optimal_values(
    inst: &common::Instance,
    train: &Arc<Matrix<f64>>,
    family: Family,
    params: &[f64],
) -> Vec<f64> {
    let cfg = SolverConfig::default();
    params
        .iter()
        .map(|&p| {
            let m = family.build(train, p).unwrap();
            solve(&inst.graph, &m, inst.source, inst.target, &cfg)
                .unwrap()
                .objective
        })
        .collect()
}

#[test]
fn optimal_value_grows_with_conservatism() {
    for seed in 0..100 {
        let inst = random_instance(seed);
        let train = Arc::new(inst.scenarios.clone());
        let n = train.scenario_count();
        for family in Family::ALL {
            let params: Vec<f64> = match family {
                Family::Permutohull => (1..=n).rev().map(|j| j as f64).collect(),
                Family::SymPermutohull => (1..=n / 2 + 1).map(|k| k as f64).collect(),
                Family::Budgeted => (0..=10).map(|g| f64::from(g) / 2.0).collect(),
                _ => (0..=20).map(|k| f64::from(k) / 5.0).collect(),
            };
            let v = optimal_values(&inst, &train, family, &params);
            for w in v.windows(2) {
                assert!(
                    w[0] <= w[1] + 1e-9 * w[1].abs().max(1.0),
                    "seed {seed} {family}: {v:?}"
                );
            }
        }
    }
}

#[test]
fn collapsed_sets_solve_to_mean_shortest_path() {
    let cfg = SolverConfig::default();
    for seed in 0..100 {
        let inst = random_instance(seed);
        let train = Arc::new(inst.scenarios.clone());
        let n = train.scenario_count();
        let mean = mean_scenario(&train).unwrap();
        let (want, _) = shortest_path(&inst.graph, &mean, inst.source, inst.target).unwrap();
        let cases = [
            (Family::ConvexHull, 0.0),
            (Family::Ellipsoid, 0.0),
            (Family::EllipsoidDiag, 0.0),
            (Family::Budgeted, 0.0),
            (Family::Permutohull, n as f64),
            (Family::SymPermutohull, 1.0),
        ];
        for (family, p) in cases {
            let m = family.build(&train, p).unwrap();
            let got = solve(&inst.graph, &m, inst.source, inst.target, &cfg)
                .unwrap()
                .objective;
            assert!(
                rel_close(got, want, 1e-9),
                "seed {seed} {family}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn single_precision_solves_agree_with_double() {
    let cfg = SolverConfig::default();
    for seed in 0..50 {
        let inst = random_instance(seed);
        let r32 = Matrix::<f32>::new(
            inst.scenarios.scenario_count(),
            inst.scenarios.arc_count(),
            inst.scenarios.values().iter().map(|&v| v as f32).collect(),
            None,
        )
        .unwrap();
        let (t64, t32) = (Arc::new(inst.scenarios.clone()), Arc::new(r32));
        for family in Family::ALL {
            let a = solve(
                &inst.graph,
                &family.build(&t64, 1.0).unwrap(),
                inst.source,
                inst.target,
                &cfg,
            )
            .unwrap();
            let b = solve(
                &inst.graph,
                &family.build(&t32, 1.0f32).unwrap(),
                inst.source,
                inst.target,
                &cfg,
            )
            .unwrap();
            assert!(
                (f64::from(b.objective) - a.objective).abs() <= 1e-4 * a.objective.max(1.0),
                "seed {seed} {family}: {} vs {}",
                b.objective,
                a.objective
            );
        }
    }
}
