//! Exact robust shortest-path solvers, one per uncertainty family, plus an
//! exhaustive oracle.
//!
//! Every solver returns a path minimizing `max_{c ∈ U} c·x` and reports the
//! objective as [`worst_case_value`] of that path, so the reported value is
//! consistent with independent evaluation by construction.

mod budgeted;
mod ellipsoid;
mod owa;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{enumerate_simple_paths, path_order, shortest_path_raw, Graph, NodeId, Path};
use crate::scalar::{approx_eq, Scalar};
use crate::uncertainty::{worst_case_value, UncertaintyModel};

pub use budgeted::solve_budgeted;
pub use ellipsoid::solve_ellipsoid;
pub use owa::solve_owa;

/// Search limits and switches shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Cap on permanent Pareto labels across all nodes in [`solve_owa`].
    pub label_budget: usize,
    /// Cap on branch-and-bound nodes in [`solve_ellipsoid`].
    pub node_budget: usize,
    /// Cap on enumerated paths in [`solve_oracle`].
    pub max_paths: usize,
    /// Dominance and bound pruning in [`solve_owa`]; off means plain enumeration.
    pub pruning: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            label_budget: 1_000_000,
            node_budget: 10_000_000,
            max_paths: 1_000_000,
            pruning: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub labels_expanded: usize,
    pub nodes_branched: usize,
    pub subproblems: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustSolution<T> {
    pub path: Path,
    pub objective: T,
    /// Family tag of the model that was solved.
    pub method: &'static str,
    /// λ for scaled families, Γ for budgeted, the top weight `q_1` for OWA models.
    pub parameter: T,
    pub diagnostics: Diagnostics,
}

fn model_parameter<T: Scalar>(model: &UncertaintyModel<T>) -> T {
    match model {
        UncertaintyModel::ConvexHull { lambda, .. }
        | UncertaintyModel::Interval { lambda, .. }
        | UncertaintyModel::Ellipsoid { lambda, .. } => *lambda,
        UncertaintyModel::Budgeted { gamma, .. } => *gamma,
        UncertaintyModel::Owa { q, .. } => q.first().copied().unwrap_or_else(T::zero),
    }
}

/// Keeps the better of two candidates under the tie-break rule.
#[derive(Debug)]
pub(crate) struct Best<T> {
    pub objective: T,
    pub path: Option<Path>,
}

impl<T: Scalar> Best<T> {
    pub fn new() -> Self {
        Self {
            objective: T::infinity(),
            path: None,
        }
    }

    /// Objective ties within the relative tie tolerance fall back to [`path_order`].
    pub fn offer(&mut self, objective: T, path: &Path) -> bool {
        let better = match &self.path {
            None => true,
            Some(cur) => {
                if approx_eq(objective, self.objective, T::tie_tolerance()) {
                    path_order(path.arcs(), cur.arcs()).is_lt()
                } else {
                    objective < self.objective
                }
            }
        };
        if better {
            self.objective = objective;
            self.path = Some(path.clone());
        }
        better
    }

    /// True when a lower bound cannot reach (or tie) the incumbent.
    pub fn prunes(&self, bound: T) -> bool {
        self.path.is_some()
            && bound > self.objective
            && !approx_eq(bound, self.objective, T::tie_tolerance())
    }
}

pub(crate) fn check_instance<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
) -> Result<()> {
    graph.check_node(source)?;
    graph.check_node(target)?;
    if model.arc_count() != graph.arc_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.arc_count(),
            found: model.arc_count(),
        });
    }
    Ok(())
}

pub(crate) fn finish<T: Scalar>(
    model: &UncertaintyModel<T>,
    path: Path,
    mut diagnostics: Diagnostics,
    started: Instant,
) -> Result<RobustSolution<T>> {
    let objective = worst_case_value(model, &path)?;
    diagnostics.wall_time = started.elapsed();
    Ok(RobustSolution {
        path,
        objective,
        method: model.family_name(),
        parameter: model_parameter(model),
        diagnostics,
    })
}

/// Interval uncertainty: one Dijkstra run on the upper bounds.
pub fn solve_interval<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
) -> Result<RobustSolution<T>> {
    let started = Instant::now();
    check_instance(graph, model, source, target)?;
    let UncertaintyModel::Interval { upper, .. } = model else {
        return Err(Error::InvalidParameter(format!(
            "interval solver given a {} model",
            model.family_name()
        )));
    };
    let (_, path) = shortest_path_raw(graph, upper, source, target).ok_or(Error::NoPath {
        from: source,
        to: target,
    })?;
    let diagnostics = Diagnostics {
        subproblems: 1,
        ..Diagnostics::default()
    };
    finish(model, path, diagnostics, started)
}

/// Minimum of [`worst_case_value`] over every simple path.
pub fn solve_oracle<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
    max_paths: usize,
) -> Result<RobustSolution<T>> {
    let started = Instant::now();
    check_instance(graph, model, source, target)?;
    let paths = enumerate_simple_paths(graph, source, target, max_paths)?;
    let mut best = Best::new();
    for p in &paths {
        best.offer(worst_case_value(model, p)?, p);
    }
    let path = best.path.ok_or(Error::NoPath {
        from: source,
        to: target,
    })?;
    let diagnostics = Diagnostics {
        labels_expanded: paths.len(),
        ..Diagnostics::default()
    };
    finish(model, path, diagnostics, started)
}

/// Dispatches to the dedicated solver for the model's family.
pub fn solve<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
    config: &SolverConfig,
) -> Result<RobustSolution<T>> {
    match model {
        UncertaintyModel::Interval { .. } => solve_interval(graph, model, source, target),
        UncertaintyModel::Budgeted { .. } => solve_budgeted(graph, model, source, target),
        UncertaintyModel::Ellipsoid { .. } => solve_ellipsoid(graph, model, source, target, config),
        UncertaintyModel::ConvexHull { .. } | UncertaintyModel::Owa { .. } => {
            solve_owa(graph, model, source, target, config)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioMatrix;

    fn diamond() -> Graph {
        Graph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn interval_picks_cheaper_parallel_arc() {
        let g = Graph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        let r = ScenarioMatrix::from_rows(vec![vec![4.0, 3.0], vec![4.0, 3.0]]).unwrap();
        let model = UncertaintyModel::interval(&r, 1.0).unwrap();
        let sol = solve_interval(&g, &model, 0, 1).unwrap();
        assert_eq!(sol.path.arcs(), &[1]);
        assert_eq!(sol.objective, 3.0);
        assert_eq!(sol.method, "interval");
    }

    #[test]
    fn interval_on_diamond() {
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 4.0, 5.0, 1.0], vec![0.5, 2.0, 1.0, 0.0]])
            .unwrap();
        let model = UncertaintyModel::interval(&r, 1.0).unwrap();
        let sol = solve_interval(&diamond(), &model, 0, 3).unwrap();
        assert_eq!(sol.objective, 5.0);
        let oracle = solve_oracle(&diamond(), &model, 0, 3, 100).unwrap();
        assert_eq!(oracle.path, sol.path);
    }

    #[test]
    fn interval_zero_lambda_uses_midpoints() {
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 4.0, 5.0, 1.0], vec![3.0, 2.0, 1.0, 2.0]])
            .unwrap();
        let model = UncertaintyModel::interval(&r, 0.0).unwrap();
        let sol = solve_interval(&diamond(), &model, 0, 3).unwrap();
        // midpoints (2, 3, 3, 1.5): via b costs 4.5, via a costs 5
        assert_eq!(sol.objective, 4.5);
        assert_eq!(sol.path.arcs(), &[1, 3]);
    }

    #[test]
    fn no_path_and_dimension_errors() {
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 1.0, 1.0, 1.0]]).unwrap();
        let model = UncertaintyModel::interval(&r, 1.0).unwrap();
        assert!(matches!(
            solve_interval(&diamond(), &model, 3, 0),
            Err(Error::NoPath { .. })
        ));
        let small = ScenarioMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let model = UncertaintyModel::interval(&small, 1.0).unwrap();
        assert!(matches!(
            solve_interval(&diamond(), &model, 0, 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn oracle_single_path_graph() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
        let model = UncertaintyModel::budgeted(&r, 1.0).unwrap();
        let sol = solve_oracle(&g, &model, 0, 2, 10).unwrap();
        assert_eq!(sol.path.arcs(), &[0, 1]);
    }
}
