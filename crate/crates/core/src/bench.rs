//! Benchmark protocol: fit every (family, parameter) method on the training
//! scenarios, solve a fixed set of random s–t pairs with each, evaluate the
//! returned paths under every evaluation scenario, and aggregate.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::scenario::ScenarioMatrix;
use crate::solvers::{solve, SolverConfig};
use crate::uncertainty::{fit_ellipsoid, Family, UncertaintyModel};

pub const RESULTS_HEADER: [&str; 7] = [
    "method",
    "param",
    "pair_id",
    "source",
    "target",
    "scenario_id",
    "objective",
];

pub const METRICS_HEADER: [&str; 7] = [
    "method",
    "param",
    "avg",
    "avg_worst",
    "avg_cvar",
    "avg_rank",
    "failed_cells",
];

/// Which scenarios the uncertainty sets are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSplit {
    /// Rows at even ordinals 0, 2, 4, …
    Even,
    /// Every row.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub family: Family,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub pair_count: usize,
    pub cvar_fraction: f64,
    pub train_split: TrainSplit,
    pub grids: Vec<Grid>,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pair_count: 200,
            cvar_fraction: 0.05,
            train_split: TrainSplit::Even,
            grids: default_grids(),
            solver: SolverConfig::default(),
        }
    }
}

/// Twenty parameters for each of the six families.
pub fn default_grids() -> Vec<Grid> {
    let grid = |family, f: fn(u32) -> f64| Grid {
        family,
        params: (1..=20).map(f).collect(),
    };
    vec![
        grid(Family::ConvexHull, |k| f64::from(k) / 10.0),
        grid(Family::Interval, |k| f64::from(k) / 10.0),
        grid(Family::Ellipsoid, |k| f64::from(k) / 5.0),
        grid(Family::Budgeted, |k| f64::from(5 * k)),
        grid(Family::Permutohull, |k| f64::from(2 * k - 1)),
        grid(Family::SymPermutohull, f64::from),
    ]
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn read_json(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn method_count(&self) -> usize {
        self.grids.iter().map(|g| g.params.len()).sum()
    }

    /// Checks the config against the number of training scenarios; reports the first problem.
    pub fn validate(&self, train_scenarios: usize) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.pair_count == 0 {
            return fail("pair_count must be at least 1".into());
        }
        if !(self.cvar_fraction > 0.0 && self.cvar_fraction <= 1.0) {
            return fail(format!(
                "cvar_fraction must lie in (0, 1], got {}",
                self.cvar_fraction
            ));
        }
        if self.grids.is_empty() {
            return fail("grids must not be empty".into());
        }
        let mut seen = Vec::new();
        for g in &self.grids {
            if g.params.is_empty() {
                return fail(format!("grid for `{}` has no parameters", g.family));
            }
            for &p in &g.params {
                if !(p.is_finite() && p >= 0.0) {
                    return fail(format!(
                        "`{}` parameter {p} must be finite and >= 0",
                        g.family
                    ));
                }
                if let Some(max) = g.family.max_column(train_scenarios) {
                    if p.fract() != 0.0 || p < 1.0 || p > max as f64 {
                        return fail(format!(
                            "`{}` column {p} outside 1..={max} for {train_scenarios} training scenarios",
                            g.family
                        ));
                    }
                }
                if seen.contains(&(g.family, p.to_bits())) {
                    return fail(format!("method `{}` {p} listed twice", g.family));
                }
                seen.push((g.family, p.to_bits()));
            }
        }
        Ok(())
    }
}

/// Training and evaluation scenarios; evaluation always uses every row.
pub fn split_scenarios(
    r: &ScenarioMatrix<f64>,
    rule: TrainSplit,
) -> (ScenarioMatrix<f64>, ScenarioMatrix<f64>) {
    let rows: Vec<usize> = match rule {
        TrainSplit::Even => (0..r.scenario_count()).step_by(2).collect(),
        TrainSplit::All => (0..r.scenario_count()).collect(),
    };
    (r.select_rows(&rows), r.clone())
}

/// Uniform ordered pairs `s ≠ t` with `t` reachable from `s`, by rejection.
pub fn sample_pairs(graph: &Graph, count: usize, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    let n = graph.node_count();
    let reach: Vec<Vec<bool>> = (0..n).map(|s| graph.reachable_from(s)).collect();
    let any = (0..n).any(|s| (0..n).any(|t| s != t && reach[s][t]));
    if !any {
        return Err(Error::NoConnectedPairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let s = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        if s != t && reach[s][t] {
            pairs.push((s, t));
        }
    }
    Ok(pairs)
}

/// One objective value, or a failed cell when `scenario_id` and `objective` are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub method: Family,
    pub param: f64,
    pub pair_id: usize,
    pub source: NodeId,
    pub target: NodeId,
    pub scenario_id: Option<usize>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedCell {
    pub method: Family,
    pub param: f64,
    pub pair_id: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    /// Method-major, then pair, then scenario.
    pub records: Vec<ResultRecord>,
    pub failures: Vec<FailedCell>,
}

struct Method {
    family: Family,
    param: f64,
    model: UncertaintyModel<f64>,
}

fn build_methods(
    config: &ExperimentConfig,
    train: &Arc<ScenarioMatrix<f64>>,
) -> Result<Vec<Method>> {
    let mut fit = None;
    let mut methods = Vec::with_capacity(config.method_count());
    for g in &config.grids {
        for &param in &g.params {
            let model = match g.family {
                Family::Ellipsoid | Family::EllipsoidDiag => {
                    if fit.is_none() {
                        let (mu, sigma) = fit_ellipsoid(train)?;
                        fit = Some((mu, Arc::new(sigma), None));
                    }
                    let (mu, sigma, diag) = fit.as_mut().unwrap();
                    let sigma = if g.family == Family::EllipsoidDiag {
                        diag.get_or_insert_with(|| Arc::new(sigma.diagonal()))
                            .clone()
                    } else {
                        sigma.clone()
                    };
                    UncertaintyModel::ellipsoid_from_fit(mu.clone(), sigma, param)
                }
                family => family.build(train, param)?,
            };
            methods.push(Method {
                family: g.family,
                param,
                model,
            });
        }
    }
    Ok(methods)
}

pub fn run_benchmark(
    config: &ExperimentConfig,
    graph: &Graph,
    scenarios: &ScenarioMatrix<f64>,
) -> Result<BenchmarkReport> {
    run_benchmark_with_progress(config, graph, scenarios, |_, _| {})
}

/// [`run_benchmark`] calling `progress(done, total)` as (method, pair) cells finish.
pub fn run_benchmark_with_progress(
    config: &ExperimentConfig,
    graph: &Graph,
    scenarios: &ScenarioMatrix<f64>,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<BenchmarkReport> {
    if scenarios.arc_count() != graph.arc_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.arc_count(),
            found: scenarios.arc_count(),
        });
    }
    let (train, eval) = split_scenarios(scenarios, config.train_split);
    config.validate(train.scenario_count())?;
    let train = Arc::new(train);
    let methods = build_methods(config, &train)?;
    let pairs = sample_pairs(graph, config.pair_count, config.seed)?;

    let total = methods.len() * pairs.len();
    let done = AtomicUsize::new(0);
    let cells: Vec<std::result::Result<Vec<f64>, String>> = (0..total)
        .into_par_iter()
        .map(|cell| {
            let (m, p) = (&methods[cell / pairs.len()], pairs[cell % pairs.len()]);
            let out = solve(graph, &m.model, p.0, p.1, &config.solver)
                .map(|sol| eval.path_costs(&sol.path))
                .map_err(|e| e.to_string());
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            out
        })
        .collect();

    let mut report = BenchmarkReport::default();
    report.records.reserve(total * eval.scenario_count());
    for (cell, outcome) in cells.into_iter().enumerate() {
        let (m, pair_id) = (&methods[cell / pairs.len()], cell % pairs.len());
        let (source, target) = pairs[pair_id];
        let record = |scenario_id, objective| ResultRecord {
            method: m.family,
            param: m.param,
            pair_id,
            source,
            target,
            scenario_id,
            objective,
        };
        match outcome {
            Ok(values) => report.records.extend(
                values
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| record(Some(i), Some(v))),
            ),
            Err(reason) => {
                report.records.push(record(None, None));
                report.failures.push(FailedCell {
                    method: m.family,
                    param: m.param,
                    pair_id,
                    reason,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodMetrics {
    pub method: Family,
    pub param: f64,
    pub avg: f64,
    pub avg_worst: f64,
    pub avg_cvar: f64,
    pub avg_rank: f64,
    pub failed_cells: usize,
}

/// Number of largest values averaged for the tail metric.
pub fn tail_count(cvar_fraction: f64, n: usize) -> usize {
    ((cvar_fraction * n as f64).ceil() as usize).clamp(1, n.max(1))
}

fn method_key(a: &(Family, f64), b: &(Family, f64)) -> std::cmp::Ordering {
    a.0.name().cmp(b.0.name()).then(a.1.total_cmp(&b.1))
}

/// Per-method metrics, sorted by method name then parameter.
///
/// Failed cells are left out of their method's averages and counted in
/// `failed_cells`. Ranks at each (pair, scenario) are taken among the methods
/// with a value there, ties sharing the mean of their positions. A method
/// without any value gets NaN metrics.
pub fn aggregate(report: &BenchmarkReport, cvar_fraction: f64) -> Result<Vec<MethodMetrics>> {
    if report.records.is_empty() {
        return Err(Error::EmptyReport);
    }
    if !(cvar_fraction > 0.0 && cvar_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "cvar_fraction must lie in (0, 1], got {cvar_fraction}"
        )));
    }
    let mut keys: Vec<(Family, f64)> = Vec::new();
    let mut index: HashMap<(Family, u64), usize> = HashMap::new();
    for r in &report.records {
        index
            .entry((r.method, r.param.to_bits()))
            .or_insert_with(|| {
                keys.push((r.method, r.param));
                keys.len() - 1
            });
    }
    let m = keys.len();
    let mut failed = vec![0usize; m];
    // per method: pair → objectives in record order
    let mut per_pair: Vec<BTreeMap<usize, Vec<f64>>> = vec![BTreeMap::new(); m];
    let mut cells: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for r in &report.records {
        let k = index[&(r.method, r.param.to_bits())];
        match (r.scenario_id, r.objective) {
            (Some(s), Some(v)) => {
                per_pair[k].entry(r.pair_id).or_default().push(v);
                cells.entry((r.pair_id, s)).or_default().push((k, v));
            }
            _ => failed[k] += 1,
        }
    }
    let mut rank_sum = vec![0.0; m];
    let mut rank_count = vec![0usize; m];
    for entries in cells.values_mut() {
        entries.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut i = 0;
        while i < entries.len() {
            let mut j = i + 1;
            while j < entries.len() && entries[j].1 == entries[i].1 {
                j += 1;
            }
            // positions i+1..=j share their mean
            let rank = (i + 1 + j) as f64 / 2.0;
            for &(k, _) in &entries[i..j] {
                rank_sum[k] += rank;
                rank_count[k] += 1;
            }
            i = j;
        }
    }
    let mut out: Vec<MethodMetrics> = (0..m)
        .map(|k| {
            let (mut sum, mut count) = (0.0, 0usize);
            let (mut worst, mut cvar) = (0.0, 0.0);
            for values in per_pair[k].values() {
                sum += values.iter().sum::<f64>();
                count += values.len();
                let mut sorted = values.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                worst += sorted[0];
                let tail = tail_count(cvar_fraction, sorted.len());
                cvar += sorted[..tail].iter().sum::<f64>() / tail as f64;
            }
            let pairs = per_pair[k].len() as f64;
            MethodMetrics {
                method: keys[k].0,
                param: keys[k].1,
                avg: sum / count as f64,
                avg_worst: worst / pairs,
                avg_cvar: cvar / pairs,
                avg_rank: rank_sum[k] / rank_count[k] as f64,
                failed_cells: failed[k],
            }
        })
        .collect();
    out.sort_by(|a, b| method_key(&(a.method, a.param), &(b.method, b.param)));
    Ok(out)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_to(writer: impl Write, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in &report.records {
        w.write_record([
            r.method.name().to_string(),
            r.param.to_string(),
            r.pair_id.to_string(),
            r.source.to_string(),
            r.target.to_string(),
            opt(r.scenario_id),
            opt(r.objective),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn write_results(path: impl AsRef<FsPath>, report: &BenchmarkReport) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_to(std::io::BufWriter::new(file), report)
}

fn check_header(found: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if found.iter().ne(want.iter().copied()) {
        return Err(Error::Schema {
            row: 1,
            column: found.iter().collect::<Vec<_>>().join(","),
            message: format!("expected header `{}`", want.join(",")),
        });
    }
    Ok(())
}

/// Reads a results CSV. Failed cells come back as records without a value;
/// their reasons are not stored in the file.
pub fn read_results_from(reader: impl Read) -> Result<BenchmarkReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut rows = rdr.records();
    let Some(header) = rows.next() else {
        return Ok(BenchmarkReport::default());
    };
    check_header(&header?, &RESULTS_HEADER)?;
    let mut report = BenchmarkReport::default();
    for (i, rec) in rows.enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |c: usize| Error::Schema {
            row,
            column: RESULTS_HEADER[c].to_string(),
            message: format!("cannot parse `{}`", rec.get(c).unwrap_or("")),
        };
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| field(c).parse::<usize>().map_err(|_| bad(c));
        let method: Family = field(0).parse().map_err(|_| bad(0))?;
        let param: f64 = field(1).parse().map_err(|_| bad(1))?;
        let scenario_id = match field(5) {
            "" => None,
            _ => Some(num(5)?),
        };
        let objective = match field(6) {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(6))?),
        };
        if scenario_id.is_some() != objective.is_some() {
            return Err(Error::Schema {
                row,
                column: "objective".into(),
                message: "scenario_id and objective must both be present or both empty".into(),
            });
        }
        let record = ResultRecord {
            method,
            param,
            pair_id: num(2)?,
            source: num(3)?,
            target: num(4)?,
            scenario_id,
            objective,
        };
        if objective.is_none() {
            report.failures.push(FailedCell {
                method,
                param,
                pair_id: record.pair_id,
                reason: String::new(),
            });
        }
        report.records.push(record);
    }
    Ok(report)
}

pub fn read_results(path: impl AsRef<FsPath>) -> Result<BenchmarkReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_results_from(std::io::BufReader::new(file))
}

pub fn write_metrics_to(writer: impl Write, metrics: &[MethodMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.method.name().to_string(),
            m.param.to_string(),
            m.avg.to_string(),
            m.avg_worst.to_string(),
            m.avg_cvar.to_string(),
            m.avg_rank.to_string(),
            m.failed_cells.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn write_metrics(path: impl AsRef<FsPath>, metrics: &[MethodMetrics]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_to(file, metrics)
}

pub fn read_metrics_from(reader: impl Read) -> Result<Vec<MethodMetrics>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut rows = rdr.records();
    let Some(header) = rows.next() else {
        return Ok(Vec::new());
    };
    check_header(&header?, &METRICS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rows.enumerate() {
        let rec = rec?;
        let bad = |c: usize| Error::Schema {
            row: i + 2,
            column: METRICS_HEADER[c].to_string(),
            message: format!("cannot parse `{}`", rec.get(c).unwrap_or("")),
        };
        let f = |c: usize| rec.get(c).unwrap_or("").parse::<f64>().map_err(|_| bad(c));
        out.push(MethodMetrics {
            method: rec.get(0).unwrap_or("").parse().map_err(|_| bad(0))?,
            param: f(1)?,
            avg: f(2)?,
            avg_worst: f(3)?,
            avg_cvar: f(4)?,
            avg_rank: f(5)?,
            failed_cells: rec.get(6).unwrap_or("").parse().map_err(|_| bad(6))?,
        });
    }
    Ok(out)
}

pub fn read_metrics(path: impl AsRef<FsPath>) -> Result<Vec<MethodMetrics>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_metrics_from(file)
}
