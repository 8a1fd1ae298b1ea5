//! Robust shortest paths under uncertainty sets fitted from raw
//! multi-scenario travel-time observations.
//!
//! The math layers ([`graph`], [`uncertainty`], [`solvers`]) are generic over
//! a [`Scalar`] (`f32` or `f64`); ingestion and benchmarking work in `f64`,
//! exposed through the aliases below.

pub mod bench;
pub mod graph;
pub mod ingest;
pub mod scalar;
pub mod scenario;
pub mod solvers;
pub mod synth;
pub mod uncertainty;

mod error;

pub use error::{Error, Result};
pub use graph::{enumerate_simple_paths, reverse_distances, shortest_path, Graph, NodeId, Path};
pub use scalar::Scalar;
pub use solvers::{
    solve, solve_budgeted, solve_ellipsoid, solve_interval, solve_oracle, solve_owa, Diagnostics,
    SolverConfig,
};
pub use uncertainty::{worst_case_value, Family};

pub type CostVector = graph::CostVector<f64>;
pub type ScenarioMatrix = scenario::ScenarioMatrix<f64>;
pub type UncertaintyModel = uncertainty::UncertaintyModel<f64>;
pub type RobustSolution = solvers::RobustSolution<f64>;
