use std::collections::BTreeMap;

use robust_paths::bench::{
    aggregate, run_benchmark, write_results_to, BenchmarkReport, ExperimentConfig, Grid, TrainSplit,
};
use robust_paths::ingest::ingest_records;
use robust_paths::synth::{generate_city, CityConfig};
use robust_paths::{Family, Graph, ScenarioMatrix, SolverConfig};

fn diamond() -> (Graph, ScenarioMatrix) {
    let g = Graph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
    let r = ScenarioMatrix::from_rows(vec![vec![1.0, 4.0, 5.0, 1.0], vec![0.5, 2.0, 1.0, 0.0]])
        .unwrap();
    (g, r)
}

#[test]
fn diamond_records_match_hand_evaluation() {
    let (g, r) = diamond();
    let cfg = ExperimentConfig {
        pair_count: 12,
        train_split: TrainSplit::All,
        grids: vec![Grid {
            family: Family::Interval,
            params: vec![1.0],
        }],
        ..ExperimentConfig::default()
    };
    let report = run_benchmark(&cfg, &g, &r).unwrap();
    assert_eq!(report.records.len(), 12 * 2);
    // upper bounds (1, 4, 5, 1): 0→3 goes via node 2
    let hand: BTreeMap<(usize, usize), [f64; 2]> = [
        ((0, 1), [1.0, 0.5]),
        ((0, 2), [4.0, 2.0]),
        ((1, 3), [5.0, 1.0]),
        ((2, 3), [1.0, 0.0]),
        ((0, 3), [5.0, 2.0]),
    ]
    .into_iter()
    .collect();
    for rec in &report.records {
        let want = hand[&(rec.source, rec.target)][rec.scenario_id.unwrap()];
        assert_eq!(rec.objective, Some(want), "{rec:?}");
    }
}

fn small_city() -> (Graph, ScenarioMatrix) {
    let city = CityConfig {
        rows: 6,
        cols: 7,
        epochs: 16,
        noise: 0.3,
        ..CityConfig::default()
    };
    let ing = ingest_records(&generate_city(&city).unwrap(), 30.0).unwrap();
    (ing.build.graph, ing.scenarios)
}

fn small_config() -> ExperimentConfig {
    let grids = vec![
        Grid {
            family: Family::ConvexHull,
            params: vec![0.5, 1.0, 2.0],
        },
        Grid {
            family: Family::Interval,
            params: vec![0.1, 1.0],
        },
        Grid {
            family: Family::Ellipsoid,
            params: vec![0.2, 4.0],
        },
        Grid {
            family: Family::EllipsoidDiag,
            params: vec![1.0],
        },
        Grid {
            family: Family::Budgeted,
            params: vec![5.0, 100.0],
        },
        Grid {
            family: Family::Permutohull,
            params: vec![1.0, 3.0, 8.0],
        },
        Grid {
            family: Family::SymPermutohull,
            params: vec![1.0, 5.0],
        },
    ];
    ExperimentConfig {
        seed: 11,
        pair_count: 15,
        grids,
        ..ExperimentConfig::default()
    }
}

fn csv_bytes(report: &BenchmarkReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_results_to(&mut buf, report).unwrap();
    buf
}

#[test]
fn sweep_is_reproducible_across_runs_and_threads() {
    let (g, r) = small_city();
    let cfg = small_config();
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let one = pool(1).install(|| run_benchmark(&cfg, &g, &r)).unwrap();
    let four = pool(4).install(|| run_benchmark(&cfg, &g, &r)).unwrap();
    assert_eq!(csv_bytes(&one), csv_bytes(&four));
    assert_eq!(one.records.len(), cfg.method_count() * 15 * 16);
    let other = ExperimentConfig {
        seed: 12,
        ..small_config()
    };
    let moved = run_benchmark(&other, &g, &r).unwrap();
    assert_ne!(csv_bytes(&one), csv_bytes(&moved));
}

#[test]
fn metrics_are_ordered_and_ranks_conserved() {
    let (g, r) = small_city();
    let cfg = small_config();
    let report = run_benchmark(&cfg, &g, &r).unwrap();
    let metrics = aggregate(&report, cfg.cvar_fraction).unwrap();
    assert_eq!(metrics.len(), cfg.method_count());
    for m in &metrics {
        assert!(
            m.avg <= m.avg_cvar + 1e-9 && m.avg_cvar <= m.avg_worst + 1e-9,
            "{m:?}"
        );
    }
    let names: Vec<(&str, f64)> = metrics.iter().map(|m| (m.method.name(), m.param)).collect();
    let mut sorted = names.clone();
    sorted.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    assert_eq!(names, sorted);
    // every cell has all methods, so mean rank is (M + 1) / 2
    let m = metrics.len() as f64;
    let mean_rank = metrics.iter().map(|x| x.avg_rank).sum::<f64>() / m;
    assert!((mean_rank - (m + 1.0) / 2.0).abs() < 1e-9);
}

#[test]
fn budget_failures_become_failed_cells() {
    let (g, r) = small_city();
    let cfg = ExperimentConfig {
        pair_count: 5,
        grids: vec![
            Grid {
                family: Family::ConvexHull,
                params: vec![1.0],
            },
            Grid {
                family: Family::Interval,
                params: vec![1.0],
            },
        ],
        solver: SolverConfig {
            label_budget: 0,
            ..SolverConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let report = run_benchmark(&cfg, &g, &r).unwrap();
    assert_eq!(report.failures.len(), 5);
    assert!(report
        .failures
        .iter()
        .all(|f| f.method == Family::ConvexHull));
    let metrics = aggregate(&report, 0.05).unwrap();
    let ch = metrics
        .iter()
        .find(|m| m.method == Family::ConvexHull)
        .unwrap();
    let iv = metrics
        .iter()
        .find(|m| m.method == Family::Interval)
        .unwrap();
    assert_eq!((ch.failed_cells, iv.failed_cells), (5, 0));
    assert!(ch.avg.is_nan());
    assert_eq!(iv.avg_rank, 1.0);
}
