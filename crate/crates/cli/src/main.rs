use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use robust_paths::bench::{self, ExperimentConfig, TrainSplit};
use robust_paths::ingest::{self, DEFAULT_SNAP_TOLERANCE_M};
use robust_paths::synth::{self, CityConfig};
use robust_paths::uncertainty::ModelRecord;
use robust_paths::{Error, Family, Graph, ScenarioMatrix, SolverConfig};

const EXIT_DATA: u8 = 1;
const EXIT_NO_PATH: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Robust shortest paths under scenario-based uncertainty sets.
#[derive(Parser, Debug)]
#[command(name = "robust-sp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a graph and travel-time scenarios from segment speed observations.
    Ingest {
        /// Observation CSV: segment_id,time_index,speed_mph,start_lon,start_lat,end_lon,end_lat
        #[arg(long)]
        observations: PathBuf,
        /// Endpoints closer than this many meters become one node.
        #[arg(long, default_value_t = DEFAULT_SNAP_TOLERANCE_M)]
        snap_tolerance: f64,
        #[arg(long)]
        graph_out: PathBuf,
        #[arg(long)]
        scenarios_out: PathBuf,
    },
    /// Solve one robust shortest-path instance.
    Solve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        /// ch | interval | ellipsoid | ellipsoid-diag | budgeted | ph | sph
        #[arg(long)]
        method: Family,
        /// λ for ch/interval/ellipsoid, Γ for budgeted, column index for ph/sph.
        #[arg(long)]
        param: f64,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        target: usize,
        /// Scenarios the set is fitted on: even (rows 0, 2, 4, …) or all.
        #[arg(long, default_value = "even", value_parser = parse_split)]
        train_split: TrainSplit,
        #[arg(long, default_value_t = SolverConfig::default().label_budget)]
        label_budget: usize,
        #[arg(long, default_value_t = SolverConfig::default().node_budget)]
        node_budget: usize,
        /// Also write the fitted model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Run every configured method on random s–t pairs and write the results CSV.
    Benchmark {
        /// Experiment JSON; omitted fields take the default protocol values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Overrides the config's pair-sampling seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate a results CSV into per-method metrics.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Share of the largest per-pair values averaged for avg_cvar.
        #[arg(long, default_value_t = 0.05)]
        cvar_fraction: f64,
    },
    /// Write synthetic city observations in the ingest CSV format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = CityConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = CityConfig::default().rows)]
        rows: usize,
        #[arg(long, default_value_t = CityConfig::default().cols)]
        cols: usize,
        #[arg(long, default_value_t = CityConfig::default().epochs)]
        epochs: usize,
        /// Relative amplitude of per-reading speed noise.
        #[arg(long, default_value_t = CityConfig::default().noise)]
        noise: f64,
        #[arg(long, default_value_t = CityConfig::default().missing_rate)]
        missing_rate: f64,
    },
}

fn parse_split(s: &str) -> Result<TrainSplit, String> {
    match s {
        "even" => Ok(TrainSplit::Even),
        "all" => Ok(TrainSplit::All),
        _ => Err(format!("expected `even` or `all`, got `{s}`")),
    }
}

/// Bad invocation detected after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NoPath { .. }) => EXIT_NO_PATH,
        Some(e) if e.is_budget() => EXIT_BUDGET,
        _ => EXIT_DATA,
    }
}

fn print_config(value: serde_json::Value) {
    eprintln!("config: {value}");
}

fn load_instance(graph: &PathBuf, scenarios: &PathBuf) -> anyhow::Result<(Graph, ScenarioMatrix)> {
    let g = Graph::read_json(graph)?;
    let r = ScenarioMatrix::read_csv(scenarios)?;
    if r.arc_count() != g.arc_count() {
        return Err(Error::DimensionMismatch {
            expected: g.arc_count(),
            found: r.arc_count(),
        })
        .with_context(|| format!("{} does not match {}", scenarios.display(), graph.display()));
    }
    Ok((g, r))
}

fn cmd_ingest(
    observations: PathBuf,
    snap_tolerance: f64,
    graph_out: PathBuf,
    scenarios_out: PathBuf,
) -> anyhow::Result<()> {
    print_config(json!({
        "command": "ingest",
        "observations": observations,
        "snap_tolerance": snap_tolerance,
        "graph_out": graph_out,
        "scenarios_out": scenarios_out,
    }));
    if !(snap_tolerance >= 0.0 && snap_tolerance.is_finite()) {
        return Err(Usage(format!(
            "--snap-tolerance must be finite and >= 0, got {snap_tolerance}"
        ))
        .into());
    }
    let records = ingest::parse_observations(&observations)?;
    let ing = ingest::ingest_records(&records, snap_tolerance)?;
    if !ing.build.dropped_segments.is_empty() {
        eprintln!(
            "dropped {} segments without observations",
            ing.build.dropped_segments.len()
        );
    }
    ing.build.graph.write_json(&graph_out)?;
    ing.scenarios.write_csv(&scenarios_out)?;
    println!(
        "{} nodes, {} arcs, {} scenarios",
        ing.build.graph.node_count(),
        ing.build.graph.arc_count(),
        ing.scenarios.scenario_count()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    graph: PathBuf,
    scenarios: PathBuf,
    method: Family,
    param: f64,
    source: usize,
    target: usize,
    train_split: TrainSplit,
    solver: SolverConfig,
    model_out: Option<PathBuf>,
) -> anyhow::Result<()> {
    print_config(json!({
        "command": "solve",
        "graph": graph,
        "scenarios": scenarios,
        "method": method,
        "param": param,
        "source": source,
        "target": target,
        "train_split": train_split,
        "solver": solver,
        "model_out": model_out,
    }));
    let (g, r) = load_instance(&graph, &scenarios)?;
    let (train, _) = bench::split_scenarios(&r, train_split);
    if let Some(max) = method.max_column(train.scenario_count()) {
        if param.fract() != 0.0 || param < 1.0 || param > max as f64 {
            return Err(Usage(format!(
                "{method} column {param} outside 1..={max} for {} training scenarios",
                train.scenario_count()
            ))
            .into());
        }
    }
    let train = Arc::new(train);
    let model = match method.build(&train, param) {
        Err(Error::InvalidParameter(m)) => return Err(Usage(m).into()),
        other => other?,
    };
    if let Some(path) = &model_out {
        let text = ModelRecord::new(&train, model.clone()).to_json()?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let sol = robust_paths::solve(&g, &model, source, target, &solver)?;
    let nodes: Vec<String> = sol.path.nodes(&g).iter().map(|n| n.to_string()).collect();
    let arcs: Vec<String> = sol.path.arcs().iter().map(|a| a.to_string()).collect();
    println!("method: {method}");
    println!("param: {param}");
    println!("path: {}", nodes.join(" -> "));
    println!("arcs: {}", arcs.join(" "));
    println!("objective: {}", sol.objective);
    let d = &sol.diagnostics;
    println!(
        "diagnostics: labels_expanded={} nodes_branched={} subproblems={} wall_time_ms={:.3}",
        d.labels_expanded,
        d.nodes_branched,
        d.subproblems,
        d.wall_time.as_secs_f64() * 1e3
    );
    Ok(())
}

fn cmd_benchmark(
    config: Option<PathBuf>,
    graph: PathBuf,
    scenarios: PathBuf,
    out: PathBuf,
    threads: usize,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    print_config(json!({
        "command": "benchmark",
        "config": config,
        "graph": graph,
        "scenarios": scenarios,
        "out": out,
        "threads": threads,
        "experiment": cfg,
    }));
    let (g, r) = load_instance(&graph, &scenarios)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("starting worker threads")?;
    let started = Instant::now();
    let step = (cfg.method_count() * cfg.pair_count / 20).max(1);
    let report = pool.install(|| {
        bench::run_benchmark_with_progress(&cfg, &g, &r, |done, total| {
            if done % step == 0 || done == total {
                eprintln!("{done}/{total} cells");
            }
        })
    })?;
    bench::write_results(&out, &report)?;
    eprintln!(
        "{} records, {} failed cells in {:.1} s",
        report.records.len(),
        report.failures.len(),
        started.elapsed().as_secs_f64()
    );
    for f in report.failures.iter().take(10) {
        eprintln!(
            "failed: {} {} pair {}: {}",
            f.method, f.param, f.pair_id, f.reason
        );
    }
    Ok(())
}

fn cmd_report(results: PathBuf, out: PathBuf, cvar_fraction: f64) -> anyhow::Result<()> {
    print_config(json!({
        "command": "report",
        "results": results,
        "out": out,
        "cvar_fraction": cvar_fraction,
    }));
    if !(cvar_fraction > 0.0 && cvar_fraction <= 1.0) {
        return Err(Usage(format!(
            "--cvar-fraction must lie in (0, 1], got {cvar_fraction}"
        ))
        .into());
    }
    let report = bench::read_results(&results)?;
    let metrics = bench::aggregate(&report, cvar_fraction)?;
    let failed: usize = metrics.iter().map(|m| m.failed_cells).sum();
    eprintln!("{} methods, {failed} failed cells", metrics.len());
    bench::write_metrics(&out, &metrics)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest {
            observations,
            snap_tolerance,
            graph_out,
            scenarios_out,
        } => cmd_ingest(observations, snap_tolerance, graph_out, scenarios_out),
        Command::Solve {
            graph,
            scenarios,
            method,
            param,
            source,
            target,
            train_split,
            label_budget,
            node_budget,
            model_out,
        } => {
            let solver = SolverConfig {
                label_budget,
                node_budget,
                ..SolverConfig::default()
            };
            cmd_solve(
                graph,
                scenarios,
                method,
                param,
                source,
                target,
                train_split,
                solver,
                model_out,
            )
        }
        Command::Benchmark {
            config,
            graph,
            scenarios,
            out,
            threads,
            seed,
        } => cmd_benchmark(config, graph, scenarios, out, threads, seed),
        Command::Report {
            results,
            out,
            cvar_fraction,
        } => cmd_report(results, out, cvar_fraction),
        Command::Synth {
            out,
            seed,
            rows,
            cols,
            epochs,
            noise,
            missing_rate,
        } => {
            let city = CityConfig {
                seed,
                rows,
                cols,
                epochs,
                noise,
                missing_rate,
                ..CityConfig::default()
            };
            print_config(json!({ "command": "synth", "out": out, "city": city }));
            let records = synth::generate_city(&city)?;
            synth::write_observations(&out, &records)?;
            println!("{} observations", records.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
