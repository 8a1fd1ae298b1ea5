//! Directed road graph, cost vectors, and the deterministic shortest-path primitives.
//!
//! Every path comparison in the crate follows one tie-break rule: lower cost
//! first, then fewer arcs, then the lexicographically smallest sequence of
//! arc indices. [`path_order`] implements the structural part of that rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::ops::Deref;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cmp_scalar, Scalar};

pub type NodeId = usize;
pub type ArcId = usize;

/// Directed multigraph with stable arc indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    arcs: Vec<(NodeId, NodeId)>,
    out_arcs: Vec<Vec<ArcId>>,
    in_arcs: Vec<Vec<ArcId>>,
    node_coords: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    node_count: usize,
    arcs: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_coords: Option<Vec<[f64; 2]>>,
}

impl Graph {
    pub fn new(node_count: usize, arcs: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let mut out_arcs = vec![Vec::new(); node_count];
        let mut in_arcs = vec![Vec::new(); node_count];
        for (id, &(tail, head)) in arcs.iter().enumerate() {
            if tail >= node_count || head >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "arc {id} ({tail}, {head}) references a node outside 0..{node_count}"
                )));
            }
            if tail == head {
                return Err(Error::InvalidGraph(format!(
                    "arc {id} is a self-loop on {tail}"
                )));
            }
            out_arcs[tail].push(id);
            in_arcs[head].push(id);
        }
        Ok(Self {
            node_count,
            arcs,
            out_arcs,
            in_arcs,
            node_coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.node_count {
            return Err(Error::InvalidGraph(format!(
                "{} node coordinates for {} nodes",
                coords.len(),
                self.node_count
            )));
        }
        self.node_coords = Some(coords);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arc(&self, id: ArcId) -> (NodeId, NodeId) {
        self.arcs[id]
    }

    pub fn arcs(&self) -> &[(NodeId, NodeId)] {
        &self.arcs
    }

    /// Outgoing arcs of `node` in increasing arc index.
    pub fn out_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.out_arcs[node]
    }

    /// Incoming arcs of `node` in increasing arc index.
    pub fn in_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.in_arcs[node]
    }

    pub fn node_coords(&self) -> Option<&[[f64; 2]]> {
        self.node_coords.as_deref()
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.node_count {
            Ok(())
        } else {
            Err(Error::InvalidGraph(format!(
                "node {node} outside 0..{}",
                self.node_count
            )))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        let graph = Graph::new(
            file.node_count,
            file.arcs.into_iter().map(|[t, h]| (t, h)).collect(),
        )?;
        match file.node_coords {
            Some(coords) => graph.with_coords(coords),
            None => Ok(graph),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = GraphFile {
            node_count: self.node_count,
            arcs: self.arcs.iter().map(|&(t, h)| [t, h]).collect(),
            node_coords: self.node_coords.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn read_json(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn write_json(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    /// Nodes reachable from `source` (including itself).
    pub fn reachable_from(&self, source: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![source];
        seen[source] = true;
        while let Some(u) = stack.pop() {
            for &a in &self.out_arcs[u] {
                let v = self.arcs[a].1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Per-arc nonnegative travel times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostVector<T>(Vec<T>);

impl<T: Scalar> CostVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < T::zero())
        {
            return Err(Error::InvalidCosts(format!(
                "entry {i} is {v}; costs must be finite and nonnegative"
            )));
        }
        Ok(Self(values))
    }

    /// Clamps negatives to zero. Callers guarantee finiteness.
    pub(crate) fn clamped(values: Vec<T>) -> Self {
        Self(values.into_iter().map(|v| v.max(T::zero())).collect())
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn check_len(&self, graph: &Graph) -> Result<()> {
        if self.0.len() == graph.arc_count() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: graph.arc_count(),
                found: self.0.len(),
            })
        }
    }

    /// Sum of the costs of `path`'s arcs.
    pub fn path_cost(&self, path: &Path) -> T {
        path.arcs().iter().map(|&a| self.0[a]).sum()
    }
}

impl<T> Deref for CostVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// A simple directed path, stored as its arc sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    source: NodeId,
    target: NodeId,
    arcs: Vec<ArcId>,
}

impl Path {
    /// Validates incidence and simplicity.
    pub fn new(graph: &Graph, source: NodeId, target: NodeId, arcs: Vec<ArcId>) -> Result<Self> {
        graph.check_node(source)?;
        graph.check_node(target)?;
        let mut seen = vec![false; graph.node_count()];
        seen[source] = true;
        let mut at = source;
        for &a in &arcs {
            if a >= graph.arc_count() {
                return Err(Error::InvalidGraph(format!("arc {a} does not exist")));
            }
            let (tail, head) = graph.arc(a);
            if tail != at {
                return Err(Error::InvalidGraph(format!(
                    "arc {a} starts at {tail}, expected {at}"
                )));
            }
            if seen[head] {
                return Err(Error::InvalidGraph(format!("node {head} repeats in path")));
            }
            seen[head] = true;
            at = head;
        }
        if at != target {
            return Err(Error::InvalidGraph(format!(
                "path ends at {at}, expected {target}"
            )));
        }
        Ok(Self {
            source,
            target,
            arcs,
        })
    }

    pub(crate) fn from_parts_unchecked(source: NodeId, target: NodeId, arcs: Vec<ArcId>) -> Self {
        Self {
            source,
            target,
            arcs,
        }
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn arcs(&self) -> &[ArcId] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Node sequence from source to target.
    pub fn nodes(&self, graph: &Graph) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(self.arcs.len() + 1);
        nodes.push(self.source);
        nodes.extend(self.arcs.iter().map(|&a| graph.arc(a).1));
        nodes
    }

    /// 0/1 incidence vector over all arcs.
    pub fn characteristic(&self, arc_count: usize) -> Vec<u8> {
        let mut x = vec![0; arc_count];
        for &a in &self.arcs {
            x[a] = 1;
        }
        x
    }
}

/// Structural tie-break: fewer arcs, then lexicographically smaller arc sequence.
pub fn path_order(a: &[ArcId], b: &[ArcId]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry<T> {
    dist: T,
    hops: usize,
    node: NodeId,
}

impl<T: Scalar> Eq for HeapEntry<T> {}

impl<T: Scalar> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, hops, node)
        cmp_scalar(other.dist, self.dist)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Scalar> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn trace(graph: &Graph, pred: &[Option<ArcId>], mut node: NodeId) -> Vec<ArcId> {
    let mut arcs = Vec::new();
    while let Some(a) = pred[node] {
        arcs.push(a);
        node = graph.arc(a).0;
    }
    arcs.reverse();
    arcs
}

/// Minimum-cost source→target path under the global tie-break rule.
pub fn shortest_path<T: Scalar>(
    graph: &Graph,
    costs: &CostVector<T>,
    source: NodeId,
    target: NodeId,
) -> Result<(T, Path)> {
    costs.check_len(graph)?;
    graph.check_node(source)?;
    graph.check_node(target)?;
    shortest_path_raw(graph, costs, source, target).ok_or(Error::NoPath {
        from: source,
        to: target,
    })
}

/// Dijkstra keyed on (distance, hops, arc sequence). Costs are assumed valid.
pub(crate) fn shortest_path_raw<T: Scalar>(
    graph: &Graph,
    costs: &[T],
    source: NodeId,
    target: NodeId,
) -> Option<(T, Path)> {
    let n = graph.node_count();
    let mut dist = vec![T::infinity(); n];
    let mut hops = vec![usize::MAX; n];
    let mut pred: Vec<Option<ArcId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = T::zero();
    hops[source] = 0;
    heap.push(HeapEntry {
        dist: T::zero(),
        hops: 0,
        node: source,
    });
    while let Some(HeapEntry {
        dist: d,
        hops: h,
        node: u,
    }) = heap.pop()
    {
        if settled[u] || d != dist[u] || h != hops[u] {
            continue;
        }
        settled[u] = true;
        if u == target {
            break;
        }
        for &a in graph.out_arcs(u) {
            let v = graph.arc(a).1;
            if settled[v] {
                continue;
            }
            let nd = d + costs[a];
            let nh = h + 1;
            let better = match cmp_scalar(nd, dist[v]).then(nh.cmp(&hops[v])) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => {
                    let incumbent = pred[v].expect("labelled node has a predecessor");
                    let mut cand = trace(graph, &pred, u);
                    cand.push(a);
                    let mut cur = trace(graph, &pred, graph.arc(incumbent).0);
                    cur.push(incumbent);
                    cand < cur
                }
            };
            if better {
                dist[v] = nd;
                hops[v] = nh;
                pred[v] = Some(a);
                heap.push(HeapEntry {
                    dist: nd,
                    hops: nh,
                    node: v,
                });
            }
        }
    }
    if !settled[target] {
        return None;
    }
    Some((
        dist[target],
        Path::from_parts_unchecked(source, target, trace(graph, &pred, target)),
    ))
}

/// Distance from every node to `target`; unreachable nodes get +infinity.
pub fn reverse_distances<T: Scalar>(
    graph: &Graph,
    costs: &CostVector<T>,
    target: NodeId,
) -> Result<Vec<T>> {
    costs.check_len(graph)?;
    graph.check_node(target)?;
    Ok(reverse_tree(graph, costs, target).0)
}

/// Reverse Dijkstra returning distances and the first arc of a shortest v→target path.
pub(crate) fn reverse_tree<T: Scalar>(
    graph: &Graph,
    costs: &[T],
    target: NodeId,
) -> (Vec<T>, Vec<Option<ArcId>>) {
    let n = graph.node_count();
    let mut dist = vec![T::infinity(); n];
    let mut next: Vec<Option<ArcId>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[target] = T::zero();
    heap.push(HeapEntry {
        dist: T::zero(),
        hops: 0,
        node: target,
    });
    while let Some(HeapEntry {
        dist: d, node: v, ..
    }) = heap.pop()
    {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &a in graph.in_arcs(v) {
            let u = graph.arc(a).0;
            let nd = d + costs[a];
            if !done[u] && nd < dist[u] {
                dist[u] = nd;
                next[u] = Some(a);
                heap.push(HeapEntry {
                    dist: nd,
                    hops: 0,
                    node: u,
                });
            }
        }
    }
    (dist, next)
}

/// Follows a reverse tree from `source`; `None` if the target is unreachable.
pub(crate) fn tree_path(
    graph: &Graph,
    next: &[Option<ArcId>],
    source: NodeId,
    target: NodeId,
) -> Option<Path> {
    let mut arcs = Vec::new();
    let mut at = source;
    while at != target {
        let a = next[at]?;
        arcs.push(a);
        at = graph.arc(a).1;
        if arcs.len() > graph.node_count() {
            return None;
        }
    }
    Some(Path::from_parts_unchecked(source, target, arcs))
}

/// Every simple source→target path in lexicographic arc-index DFS order.
pub fn enumerate_simple_paths(
    graph: &Graph,
    source: NodeId,
    target: NodeId,
    max_paths: usize,
) -> Result<Vec<Path>> {
    if max_paths == 0 {
        return Err(Error::InvalidParameter("max_paths must be positive".into()));
    }
    graph.check_node(source)?;
    graph.check_node(target)?;
    let mut out = Vec::new();
    if source == target {
        out.push(Path::from_parts_unchecked(source, target, Vec::new()));
        return Ok(out);
    }
    let mut on_path = vec![false; graph.node_count()];
    let mut arcs = Vec::new();
    // explicit stack of (node, next out-arc position)
    let mut stack = vec![(source, 0usize)];
    on_path[source] = true;
    while let Some(top) = stack.last_mut() {
        let u = top.0;
        let outs = graph.out_arcs(u);
        if top.1 == outs.len() {
            stack.pop();
            on_path[u] = false;
            arcs.pop();
            continue;
        }
        let a = outs[top.1];
        top.1 += 1;
        let v = graph.arc(a).1;
        if on_path[v] {
            continue;
        }
        if v == target {
            if out.len() == max_paths {
                return Err(Error::TooManyPaths(max_paths));
            }
            let mut p = arcs.clone();
            p.push(a);
            out.push(Path::from_parts_unchecked(source, target, p));
            continue;
        }
        on_path[v] = true;
        arcs.push(a);
        stack.push((v, 0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Graph, CostVector<f64>) {
        (
            Graph::new(3, vec![(0, 1), (1, 2)]).unwrap(),
            CostVector::new(vec![1.0, 2.0]).unwrap(),
        )
    }

    // s=0, a=1, b=2, t=3; arcs s→a, s→b, a→t, b→t
    fn diamond() -> (Graph, CostVector<f64>) {
        (
            Graph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap(),
            CostVector::new(vec![1.0, 4.0, 5.0, 1.0]).unwrap(),
        )
    }

    #[test]
    fn rejects_bad_arcs() {
        assert!(matches!(
            Graph::new(2, vec![(0, 2)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(
            Graph::new(2, vec![(1, 1)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(CostVector::new(vec![1.0, -0.5]).is_err());
        assert!(CostVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn line_graph_shortest_path() {
        let (g, c) = line();
        let (d, p) = shortest_path(&g, &c, 0, 2).unwrap();
        assert_eq!(d, 3.0);
        assert_eq!(p.arcs(), &[0, 1]);
    }

    #[test]
    fn diamond_shortest_path_goes_via_b() {
        let (g, c) = diamond();
        let (d, p) = shortest_path(&g, &c, 0, 3).unwrap();
        assert_eq!(d, 5.0);
        assert_eq!(p.arcs(), &[1, 3]);
        assert_eq!(p.nodes(&g), vec![0, 2, 3]);
    }

    #[test]
    fn source_equals_target_is_empty() {
        let (g, c) = diamond();
        let (d, p) = shortest_path(&g, &c, 2, 2).unwrap();
        assert_eq!(d, 0.0);
        assert!(p.is_empty());
    }

    #[test]
    fn unreachable_is_no_path() {
        let (g, c) = diamond();
        assert!(matches!(
            shortest_path(&g, &c, 3, 0),
            Err(Error::NoPath { from: 3, to: 0 })
        ));
    }

    #[test]
    fn ties_prefer_fewer_arcs_then_lex() {
        // direct arc (index 3) vs two-arc route of equal cost
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2), (0, 2)]).unwrap();
        let c = CostVector::new(vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let (_, p) = shortest_path(&g, &c, 0, 2).unwrap();
        assert_eq!(p.arcs(), &[2]);

        // two equal two-arc routes: 0→1→3 (arcs 0,2) and 0→2→3 (arcs 1,3)
        let g = Graph::new(4, vec![(0, 2), (0, 1), (1, 3), (2, 3)]).unwrap();
        let c = CostVector::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let (_, p) = shortest_path(&g, &c, 0, 3).unwrap();
        assert_eq!(p.arcs(), &[0, 3]);
    }

    #[test]
    fn zero_cost_cycles_stay_simple() {
        let g = Graph::new(3, vec![(0, 1), (1, 0), (1, 2)]).unwrap();
        let c = CostVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        let (_, p) = shortest_path(&g, &c, 0, 2).unwrap();
        assert_eq!(p.arcs(), &[0, 2]);
    }

    #[test]
    fn reverse_distance_tables() {
        let (g, c) = line();
        assert_eq!(reverse_distances(&g, &c, 2).unwrap(), vec![3.0, 2.0, 0.0]);

        let (g, c) = diamond();
        assert_eq!(
            reverse_distances(&g, &c, 3).unwrap(),
            vec![5.0, 5.0, 1.0, 0.0]
        );

        let g = Graph::new(3, vec![(0, 1)]).unwrap();
        let c = CostVector::new(vec![1.0_f64]).unwrap();
        let table = reverse_distances(&g, &c, 1).unwrap();
        assert!(table[2].is_infinite());
    }

    #[test]
    fn enumeration_counts() {
        let (g, _) = diamond();
        let paths = enumerate_simple_paths(&g, 0, 3, 10).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].arcs(), &[0, 2]);

        let (g, _) = line();
        assert_eq!(enumerate_simple_paths(&g, 0, 2, 10).unwrap().len(), 1);

        let mut arcs = Vec::new();
        for u in 0..4 {
            for v in 0..4 {
                if u != v {
                    arcs.push((u, v));
                }
            }
        }
        let k4 = Graph::new(4, arcs).unwrap();
        assert_eq!(enumerate_simple_paths(&k4, 0, 3, 100).unwrap().len(), 5);
        assert!(matches!(
            enumerate_simple_paths(&k4, 0, 3, 4),
            Err(Error::TooManyPaths(4))
        ));
    }

    #[test]
    fn json_roundtrip_keeps_arc_order() {
        let g = Graph::new(3, vec![(2, 0), (0, 1), (0, 1)])
            .unwrap()
            .with_coords(vec![[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
            .unwrap();
        let back = Graph::from_json_str(&g.to_json_string().unwrap()).unwrap();
        assert_eq!(back, g);
        let plain = Graph::from_json_str(r#"{"node_count":2,"arcs":[[0,1]]}"#).unwrap();
        assert!(plain.node_coords().is_none());
    }

    #[test]
    fn path_validation() {
        let (g, _) = diamond();
        assert!(Path::new(&g, 0, 3, vec![0, 2]).is_ok());
        assert!(Path::new(&g, 0, 3, vec![0, 3]).is_err());
        assert!(Path::new(&g, 0, 2, vec![0, 2]).is_err());
    }
}
