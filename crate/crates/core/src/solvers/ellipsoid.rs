use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{reverse_tree, shortest_path_raw, ArcId, Graph, NodeId, Path};
use crate::scalar::{cmp_scalar, Scalar};
use crate::uncertainty::{worst_case_value, Covariance, UncertaintyModel};

use super::{check_instance, finish, Best, Diagnostics, RobustSolution, SolverConfig};

/// Admissible completion bounds for a partial path ending at some node.
struct Bounds<T> {
    lambda: T,
    /// μ-distance to the target.
    mean_to_go: Vec<T>,
    /// Variance-distance to the target, when `xᵀΣx` grows monotonically along a path.
    var_to_go: Option<Vec<T>>,
    /// Linear minorant `c_dir ≤ objective` and its distance to the target.
    direction: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Bounds<T> {
    fn lower(&self, node: NodeId, mean: T, quad: T, dir: T) -> T {
        let mut lb = mean + self.mean_to_go[node];
        if let Some(var) = &self.var_to_go {
            lb = lb.max(mean + self.mean_to_go[node] + (self.lambda * (quad + var[node])).sqrt());
        }
        if let Some((_, to_go)) = &self.direction {
            lb = lb.max(dir + to_go[node]);
        }
        lb
    }
}

/// Ellipsoidal objective `μ·x + sqrt(λ xᵀΣx)` by depth-first branch and bound.
///
/// The base bound is the μ-cost of the partial path plus the μ-distance to
/// the target; the conic term is nonnegative so it never overestimates. Two
/// further admissible bounds tighten it: with a diagonal or entrywise
/// nonnegative Σ the quadratic form only grows along a path, and for any
/// direction `y` Cauchy–Schwarz gives `sqrt(λ xᵀΣx) ≥ sqrt(λ) yᵀΣx / sqrt(yᵀΣy)`,
/// a linear minorant usable with reverse Dijkstra once scaled to stay
/// nonnegative. Children are explored in increasing bound order.
pub fn solve_ellipsoid<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
    config: &SolverConfig,
) -> Result<RobustSolution<T>> {
    let started = Instant::now();
    check_instance(graph, model, source, target)?;
    let UncertaintyModel::Ellipsoid {
        mu, sigma, lambda, ..
    } = model
    else {
        return Err(Error::InvalidParameter(format!(
            "ellipsoid solver given a {} model",
            model.family_name()
        )));
    };
    let lambda = *lambda;
    let sigma: &Covariance<T> = sigma;
    let mut diagnostics = Diagnostics::default();
    let mut best = Best::new();

    let (mean_to_go, _) = reverse_tree(graph, mu, target);
    if mean_to_go[source].is_infinite() {
        return Err(Error::NoPath {
            from: source,
            to: target,
        });
    }
    let (_, mean_path) = shortest_path_raw(graph, mu, source, target).ok_or(Error::NoPath {
        from: source,
        to: target,
    })?;
    best.offer(worst_case_value(model, &mean_path)?, &mean_path);
    diagnostics.subproblems += 1;

    if lambda == T::zero() {
        // the objective is linear in μ and the tie-broken Dijkstra path is optimal
        return finish(model, mean_path, diagnostics, started);
    }

    let n = graph.arc_count();
    let std_costs: Vec<T> = (0..n)
        .map(|a| mu[a] + (lambda * sigma.variance(a).max(T::zero())).sqrt())
        .collect();
    if let Some((_, p)) = shortest_path_raw(graph, &std_costs, source, target) {
        best.offer(worst_case_value(model, &p)?, &p);
        diagnostics.subproblems += 1;
    }

    let var_to_go = sigma.is_nonnegative().then(|| {
        let var: Vec<T> = (0..n).map(|a| sigma.variance(a)).collect();
        reverse_tree(graph, &var, target).0
    });
    let direction = best
        .path
        .as_ref()
        .and_then(|p| directional_costs(mu, sigma, lambda, p.arcs()))
        .map(|costs| {
            let to_go = reverse_tree(graph, &costs, target).0;
            (costs, to_go)
        });
    if let Some((costs, _)) = &direction {
        if let Some((_, p)) = shortest_path_raw(graph, costs, source, target) {
            best.offer(worst_case_value(model, &p)?, &p);
            diagnostics.subproblems += 1;
        }
    }
    let bounds = Bounds {
        lambda,
        mean_to_go,
        var_to_go,
        direction,
    };

    let mut search = Search {
        graph,
        mu,
        sigma,
        lambda,
        bounds: &bounds,
        target,
        on_path: vec![false; graph.node_count()],
        arcs: Vec::new(),
        budget: config.node_budget,
        diagnostics: &mut diagnostics,
        best: &mut best,
        source,
    };
    search.on_path[source] = true;
    search.run(source)?;

    let path = best.path.ok_or(Error::NoPath {
        from: source,
        to: target,
    })?;
    finish(model, path, diagnostics, started)
}

/// `μ + α u` with `u = sqrt(λ) Σy / sqrt(yᵀΣy)` and the largest α ≤ 1 keeping every entry ≥ 0.
fn directional_costs<T: Scalar>(
    mu: &[T],
    sigma: &Covariance<T>,
    lambda: T,
    y: &[ArcId],
) -> Option<Vec<T>> {
    let norm = sigma.quadratic_form(y).sqrt();
    if norm <= T::zero() {
        return None;
    }
    let scale = lambda.sqrt() / norm;
    let u: Vec<T> = (0..mu.len())
        .map(|a| scale * y.iter().map(|&b| sigma.get(a, b)).sum::<T>())
        .collect();
    let mut alpha = T::one();
    for (&m, &ua) in mu.iter().zip(&u) {
        if ua < T::zero() {
            alpha = alpha.min(m / -ua);
        }
    }
    if alpha <= T::zero() {
        return None;
    }
    Some(
        mu.iter()
            .zip(&u)
            .map(|(&m, &ua)| (m + alpha * ua).max(T::zero()))
            .collect(),
    )
}

struct Search<'a, T> {
    graph: &'a Graph,
    mu: &'a [T],
    sigma: &'a Covariance<T>,
    lambda: T,
    bounds: &'a Bounds<T>,
    source: NodeId,
    target: NodeId,
    on_path: Vec<bool>,
    arcs: Vec<ArcId>,
    budget: usize,
    diagnostics: &'a mut Diagnostics,
    best: &'a mut Best<T>,
}

struct Child<T> {
    arc: ArcId,
    head: NodeId,
    mean: T,
    quad: T,
    dir: T,
    bound: T,
}

impl<T: Scalar> Search<'_, T> {
    fn quad_increment(&self, arc: ArcId) -> T {
        let two = T::one() + T::one();
        match self.sigma {
            Covariance::Diagonal { variances } => variances[arc],
            Covariance::Dense { .. } => {
                let cross: T = self.arcs.iter().map(|&b| self.sigma.get(arc, b)).sum();
                self.sigma.get(arc, arc) + two * cross
            }
        }
    }

    /// Explicit-stack DFS; each frame holds its sorted children and a cursor.
    fn run(&mut self, source: NodeId) -> Result<()> {
        let mut frames: Vec<(Vec<Child<T>>, usize)> =
            vec![(self.children(source, T::zero(), T::zero(), T::zero()), 0)];
        while let Some((children, cursor)) = frames.last_mut() {
            if *cursor == children.len() {
                frames.pop();
                if let Some(a) = self.arcs.pop() {
                    self.on_path[self.graph.arc(a).1] = false;
                }
                continue;
            }
            let child = &children[*cursor];
            *cursor += 1;
            if self.best.prunes(child.bound) {
                // siblings are sorted by bound
                *cursor = children.len();
                continue;
            }
            self.diagnostics.nodes_branched += 1;
            if self.diagnostics.nodes_branched > self.budget {
                return Err(Error::NodeBudgetExceeded(self.budget));
            }
            let (arc, head, mean, quad, dir) =
                (child.arc, child.head, child.mean, child.quad, child.dir);
            if head == self.target {
                let mut arcs = self.arcs.clone();
                arcs.push(arc);
                let value = mean + (self.lambda * quad.max(T::zero())).sqrt();
                let path = Path::from_parts_unchecked(self.source, self.target, arcs);
                self.best.offer(value, &path);
                continue;
            }
            self.arcs.push(arc);
            self.on_path[head] = true;
            let next = self.children(head, mean, quad, dir);
            frames.push((next, 0));
        }
        Ok(())
    }

    fn children(&self, node: NodeId, mean: T, quad: T, dir: T) -> Vec<Child<T>> {
        let mut out: Vec<Child<T>> = self
            .graph
            .out_arcs(node)
            .iter()
            .filter_map(|&a| {
                let head = self.graph.arc(a).1;
                if self.on_path[head] || self.bounds.mean_to_go[head].is_infinite() {
                    return None;
                }
                let mean = mean + self.mu[a];
                let quad = quad + self.quad_increment(a);
                let dir = match &self.bounds.direction {
                    Some((costs, _)) => dir + costs[a],
                    None => dir,
                };
                let bound = self.bounds.lower(head, mean, quad.max(T::zero()), dir);
                if self.best.prunes(bound) {
                    return None;
                }
                Some(Child {
                    arc: a,
                    head,
                    mean,
                    quad,
                    dir,
                    bound,
                })
            })
            .collect();
        out.sort_by(|x, y| cmp_scalar(x.bound, y.bound).then(x.arc.cmp(&y.arc)));
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::CostVector;
    use crate::scenario::ScenarioMatrix;

    #[test]
    fn parallel_arcs_prefer_low_variance() {
        let g = Graph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 3.0], vec![5.0, 3.0]]).unwrap();
        for diag in [false, true] {
            let m = UncertaintyModel::ellipsoid(&r, 1.0, diag).unwrap();
            let sol = solve_ellipsoid(&g, &m, 0, 1, &SolverConfig::default()).unwrap();
            assert_eq!(sol.path.arcs(), &[1]);
            assert_eq!(sol.objective, 3.0);
        }
    }

    #[test]
    fn single_arc_formula() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let m = UncertaintyModel::Ellipsoid {
            mu: CostVector::new(vec![10.0]).unwrap(),
            sigma: Arc::new(Covariance::Dense {
                n: 1,
                values: vec![9.0],
            }),
            lambda: 4.0,
            diagonal_only: false,
        };
        let sol = solve_ellipsoid(&g, &m, 0, 1, &SolverConfig::default()).unwrap();
        assert_eq!(sol.objective, 16.0);
    }

    #[test]
    fn zero_lambda_is_mean_shortest_path() {
        let g = Graph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 4.0, 5.0, 1.0], vec![3.0, 2.0, 1.0, 3.0]])
            .unwrap();
        let m = UncertaintyModel::ellipsoid(&r, 0.0, false).unwrap();
        let sol = solve_ellipsoid(&g, &m, 0, 3, &SolverConfig::default()).unwrap();
        // means (2, 3, 3, 2): both routes cost 5, fewer arcs tie → lexicographic
        assert_eq!(sol.objective, 5.0);
        assert_eq!(sol.path.arcs(), &[0, 2]);
    }

    #[test]
    fn node_budget_is_enforced() {
        // a 3x3 grid of alternatives where the mean path is not optimal
        let g = Graph::new(3, vec![(0, 1), (0, 1), (1, 2), (1, 2)]).unwrap();
        let r = ScenarioMatrix::from_rows(vec![vec![1.0, 2.0, 1.0, 2.0], vec![9.0, 2.0, 9.0, 2.0]])
            .unwrap();
        let m = UncertaintyModel::ellipsoid(&r, 4.0, false).unwrap();
        let cfg = SolverConfig {
            node_budget: 1,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_ellipsoid(&g, &m, 0, 2, &cfg),
            Err(Error::NodeBudgetExceeded(1))
        ));
        let sol = solve_ellipsoid(&g, &m, 0, 2, &SolverConfig::default()).unwrap();
        assert_eq!(sol.objective, 4.0);
    }
}
