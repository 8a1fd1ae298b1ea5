use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{reverse_tree, shortest_path_raw, tree_path, ArcId, Graph, NodeId, Path};
use crate::scalar::{cmp_scalar, Scalar};
use crate::scenario::ScenarioMatrix;
use crate::uncertainty::{mean_scenario, owa_value, UncertaintyModel};

use super::{check_instance, finish, Best, Diagnostics, RobustSolution, SolverConfig};

const ROOT: usize = usize::MAX;

/// Label arena. Label `i` owns `costs[i * width..(i + 1) * width]`.
struct Labels<T> {
    width: usize,
    costs: Vec<T>,
    node: Vec<NodeId>,
    parent: Vec<usize>,
    arc: Vec<ArcId>,
}

impl<T: Scalar> Labels<T> {
    fn costs(&self, i: usize) -> &[T] {
        &self.costs[i * self.width..(i + 1) * self.width]
    }

    fn push(&mut self, node: NodeId, parent: usize, arc: ArcId, costs: &[T]) -> usize {
        self.costs.extend_from_slice(costs);
        self.node.push(node);
        self.parent.push(parent);
        self.arc.push(arc);
        self.node.len() - 1
    }

    fn arcs(&self, mut i: usize) -> Vec<ArcId> {
        let mut arcs = Vec::new();
        while self.parent[i] != ROOT {
            arcs.push(self.arc[i]);
            i = self.parent[i];
        }
        arcs.reverse();
        arcs
    }

    fn visits(&self, mut i: usize, node: NodeId) -> bool {
        loop {
            if self.node[i] == node {
                return true;
            }
            if self.parent[i] == ROOT {
                return false;
            }
            i = self.parent[i];
        }
    }
}

/// Linear minorants `w·y + d_w(v)` of the completed OWA objective.
struct Directions<T> {
    weights: Vec<Vec<T>>,
    /// Node-major distances to the target, one column per weight vector.
    to_target: Vec<Vec<T>>,
}

const MAX_DIRECTIONS: usize = 8;

impl<T: Scalar> Directions<T> {
    fn add(&mut self, graph: &Graph, scenarios: &ScenarioMatrix<T>, target: NodeId, w: Vec<T>) {
        if self.weights.len() >= MAX_DIRECTIONS {
            return;
        }
        let (dist, _) = reverse_tree(graph, &combined_costs(scenarios, &w), target);
        self.weights.push(w);
        self.to_target.push(dist);
    }

    /// Worst-case weights of cost vector `y`: `q` assigned in decreasing order of `y`.
    fn worst_case_weights(y: &[T], q: &[T]) -> Vec<T> {
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by(|&a, &b| cmp_scalar(y[b], y[a]).then(a.cmp(&b)));
        let mut w = vec![T::zero(); y.len()];
        for (j, &i) in order.iter().enumerate() {
            w[i] = q[j];
        }
        w
    }

    fn bound(&self, y: &[T], node: NodeId) -> T {
        let mut best = T::neg_infinity();
        for (w, d) in self.weights.iter().zip(&self.to_target) {
            let v = w.iter().zip(y).map(|(&a, &b)| a * b).sum::<T>() + d[node];
            if v > best {
                best = v;
            }
        }
        best
    }
}

fn combined_costs<T: Scalar>(scenarios: &ScenarioMatrix<T>, w: &[T]) -> Vec<T> {
    let mut costs = vec![T::zero(); scenarios.arc_count()];
    for (i, &wi) in w.iter().enumerate() {
        if wi > T::zero() {
            for (c, &x) in costs.iter_mut().zip(scenarios.row(i)) {
                *c = *c + wi * x;
            }
        }
    }
    costs
}

const SADDLE_ROUNDS: usize = 48;

/// Weights in the permutohull of `q` with a large value of
/// `min_x w·C x`, found by fictitious play between the path and the weights.
/// Every best-response path is offered as an incumbent.
#[allow(clippy::too_many_arguments)]
fn saddle_weights<T: Scalar>(
    graph: &Graph,
    scenarios: &ScenarioMatrix<T>,
    q: &[T],
    source: NodeId,
    target: NodeId,
    start: Vec<T>,
    best: &mut Best<T>,
    diagnostics: &mut Diagnostics,
) -> Vec<T> {
    let width = q.len();
    let mut w_avg = start.clone();
    let mut y_avg = vec![T::zero(); width];
    let mut best_w = start;
    let mut best_lower = T::neg_infinity();
    for round in 0..SADDLE_ROUNDS {
        let costs = combined_costs(scenarios, &w_avg);
        diagnostics.subproblems += 1;
        let Some((lower, path)) = shortest_path_raw(graph, &costs, source, target) else {
            break;
        };
        let y = scenarios.path_costs(&path);
        best.offer(owa_value(&y, q), &path);
        if lower > best_lower {
            best_lower = lower;
            best_w = w_avg.clone();
        }
        if best.objective - best_lower <= best.objective.abs() * T::lit(1e-6) {
            break;
        }
        let k = T::lit((round + 1) as f64);
        for (a, &v) in y_avg.iter_mut().zip(&y) {
            *a = *a + (v - *a) / k;
        }
        let vertex = Directions::worst_case_weights(&y_avg, q);
        let k1 = T::lit((round + 2) as f64);
        for (a, &v) in w_avg.iter_mut().zip(&vertex) {
            *a = *a + (v - *a) / k1;
        }
    }
    best_w
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry<T> {
    sum: T,
    hops: usize,
    label: usize,
}

impl<T: Scalar> Eq for Entry<T> {}

impl<T: Scalar> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_scalar(other.sum, self.sum)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.label.cmp(&self.label))
    }
}

impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dominated<T: Scalar>(candidate: &[T], by: &[T]) -> bool {
    by.iter().zip(candidate).all(|(b, c)| b <= c)
}

/// Ordered-weighted-average objective (convex hull and both permutohulls).
///
/// Multi-criteria label setting over per-scenario cost vectors. Labels are
/// settled in order of their scenario-sum, then hop count, then arc sequence;
/// a label is discarded when a settled label at its node is componentwise
/// no worse. Because the weights are nonnegative the OWA objective is
/// monotone in every component, so a dominated label never completes to a
/// strictly better path. Labels whose completion bound exceeds the incumbent
/// are cut. The bound is the larger of `OWA(y + h)`, with `h` the
/// per-scenario distances to the target, and `w·y + d_w` for a few weight
/// vectors `w` in the permutohull of `q` (uniform, and the worst-case
/// weights of each new incumbent), with `d_w` the distance to the target
/// under arc costs `w·c`. Both are valid because `OWA(z) ≥ w·z` for every
/// such `w`.
pub fn solve_owa<T: Scalar>(
    graph: &Graph,
    model: &UncertaintyModel<T>,
    source: NodeId,
    target: NodeId,
    config: &SolverConfig,
) -> Result<RobustSolution<T>> {
    let started = Instant::now();
    check_instance(graph, model, source, target)?;
    let Some((scenarios, q)) = model.owa_parts() else {
        return Err(Error::InvalidParameter(format!(
            "OWA solver given a {} model",
            model.family_name()
        )));
    };
    let width = scenarios.scenario_count();
    let n_nodes = graph.node_count();
    let mut diagnostics = Diagnostics::default();
    let mut best = Best::new();

    // per-scenario distances to the target, node-major
    let mut to_target = vec![T::zero(); n_nodes * width];
    for i in 0..width {
        let (dist, next) = reverse_tree(graph, scenarios.row(i), target);
        if dist[source].is_infinite() {
            return Err(Error::NoPath {
                from: source,
                to: target,
            });
        }
        for v in 0..n_nodes {
            to_target[v * width + i] = dist[v];
        }
        if config.pruning {
            if let Some(p) = tree_path(graph, &next, source, target) {
                best.offer(owa_value(&scenarios.path_costs(&p), &q), &p);
            }
        }
    }
    let mut directions = Directions {
        weights: Vec::new(),
        to_target: Vec::new(),
    };
    if config.pruning {
        let mean = mean_scenario(scenarios)?;
        if let Some((_, p)) = shortest_path_raw(graph, &mean, source, target) {
            best.offer(owa_value(&scenarios.path_costs(&p), &q), &p);
        }
        let total: T = q.iter().copied().sum();
        let uniform = vec![total / T::lit(width as f64); width];
        let w = saddle_weights(
            graph,
            scenarios,
            &q,
            source,
            target,
            uniform,
            &mut best,
            &mut diagnostics,
        );
        directions.add(graph, scenarios, target, w);
    }

    let mut labels = Labels {
        width,
        costs: Vec::new(),
        node: Vec::new(),
        parent: Vec::new(),
        arc: Vec::new(),
    };
    let mut hops = Vec::new();
    let mut settled: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut settled_total = 0usize;
    let mut heap = BinaryHeap::new();
    let zero = vec![T::zero(); width];
    let root = labels.push(source, ROOT, 0, &zero);
    hops.push(0usize);
    heap.push(Entry {
        sum: T::zero(),
        hops: 0,
        label: root,
    });

    let mut child = vec![T::zero(); width];
    let mut bound_buf = vec![T::zero(); width];
    let mut group = Vec::new();
    while let Some(first) = heap.pop() {
        // entries tied on (sum, hops) are settled in arc-sequence order
        group.clear();
        group.push(first.label);
        while let Some(next) = heap.peek() {
            if next.sum == first.sum && next.hops == first.hops {
                group.push(next.label);
                heap.pop();
            } else {
                break;
            }
        }
        if group.len() > 1 {
            group.sort_by_cached_key(|&l| labels.arcs(l));
        }
        for &l in &group {
            let v = labels.node[l];
            if config.pruning
                && settled[v]
                    .iter()
                    .any(|&o| dominated(labels.costs(l), labels.costs(o)))
            {
                continue;
            }
            settled[v].push(l);
            settled_total += 1;
            if settled_total > config.label_budget {
                return Err(Error::LabelBudgetExceeded(config.label_budget));
            }
            if v == target {
                let path = Path::from_parts_unchecked(source, target, labels.arcs(l));
                if best.offer(owa_value(labels.costs(l), &q), &path) && config.pruning {
                    let w = Directions::worst_case_weights(labels.costs(l), &q);
                    directions.add(graph, scenarios, target, w);
                }
                continue;
            }
            diagnostics.labels_expanded += 1;
            for &a in graph.out_arcs(v) {
                let w = graph.arc(a).1;
                if !config.pruning && labels.visits(l, w) {
                    continue;
                }
                let mut sum = T::zero();
                for (i, c) in child.iter_mut().enumerate() {
                    *c = labels.costs(l)[i] + scenarios.get(i, a);
                    sum = sum + *c;
                }
                if config.pruning {
                    let h = &to_target[w * width..(w + 1) * width];
                    if h[0].is_infinite() {
                        continue;
                    }
                    for ((b, &c), &d) in bound_buf.iter_mut().zip(&child).zip(h) {
                        *b = c + d;
                    }
                    if best.prunes(directions.bound(&child, w))
                        || best.prunes(owa_value(&bound_buf, &q))
                    {
                        continue;
                    }
                    if settled[w]
                        .iter()
                        .any(|&o| dominated(&child, labels.costs(o)))
                    {
                        continue;
                    }
                }
                let id = labels.push(w, l, a, &child);
                hops.push(hops[l] + 1);
                heap.push(Entry {
                    sum,
                    hops: hops[id],
                    label: id,
                });
            }
        }
    }
    let path = best.path.ok_or(Error::NoPath {
        from: source,
        to: target,
    })?;
    finish(model, path, diagnostics, started)
}
