#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_paths::{Graph, ScenarioMatrix};

/// Random small instance: graph, scenario data, and an s-t pair with t reachable from s.
pub struct Instance {
    pub graph: Graph,
    pub scenarios: ScenarioMatrix,
    pub source: usize,
    pub target: usize,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nodes = rng.gen_range(3..=8);
        let arc_count = rng.gen_range(nodes..=16);
        let mut arcs = Vec::with_capacity(arc_count);
        while arcs.len() < arc_count {
            let t = rng.gen_range(0..nodes);
            let h = rng.gen_range(0..nodes);
            if t != h {
                arcs.push((t, h));
            }
        }
        let graph = Graph::new(nodes, arcs).unwrap();
        let n_scen = rng.gen_range(2..=6);
        let values = (0..n_scen * arc_count)
            .map(|_| rng.gen_range(0.0..10.0))
            .collect();
        let scenarios = ScenarioMatrix::new(n_scen, arc_count, values, None).unwrap();
        let source = rng.gen_range(0..nodes);
        let reach = graph.reachable_from(source);
        let targets: Vec<usize> = (0..nodes).filter(|&v| v != source && reach[v]).collect();
        if targets.is_empty() {
            continue;
        }
        let target = targets[rng.gen_range(0..targets.len())];
        return Instance {
            graph,
            scenarios,
            source,
            target,
        };
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Every permutation of `0..n`, by Heap's algorithm.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, p, out);
            if k.is_multiple_of(2) {
                p.swap(i, k - 1);
            } else {
                p.swap(0, k - 1);
            }
        }
        heap(k - 1, p, out);
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut p, &mut out);
    out
}

/// `max_σ Σ q_σ(i) y_i` by trying every permutation.
pub fn brute_owa(y: &[f64], q: &[f64]) -> f64 {
    permutations(y.len())
        .iter()
        .map(|s| s.iter().enumerate().map(|(i, &j)| q[j] * y[i]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}
