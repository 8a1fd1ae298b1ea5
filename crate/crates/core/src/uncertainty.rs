//! Uncertainty sets fitted from scenario data, their scaling rules, and
//! worst-case evaluation of a fixed path.
//!
//! Five model shapes cover six set families: the convex hull of the
//! scenarios is the ordered-weighted-average model with weights
//! `(1, 0, ..., 0)`, and both permutohull variants are OWA models with a
//! different weight column. Scaling that would push a travel time below
//! zero is clamped at zero when the set is built.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CostVector, Path};
use crate::scalar::{cmp_scalar, Scalar};
use crate::scenario::ScenarioMatrix;

/// Covariance of the arc travel times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Covariance<T> {
    /// Row-major symmetric `n×n` matrix.
    Dense { n: usize, values: Vec<T> },
    /// Only the variances; off-diagonal entries are zero.
    Diagonal { variances: Vec<T> },
}

impl<T: Scalar> Covariance<T> {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Dense { n, .. } => *n,
            Covariance::Diagonal { variances } => variances.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match self {
            Covariance::Dense { n, values } => values[i * n + j],
            Covariance::Diagonal { variances } => {
                if i == j {
                    variances[i]
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn variance(&self, i: usize) -> T {
        self.get(i, i)
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Covariance::Diagonal { .. })
    }

    /// Drops every off-diagonal entry.
    pub fn diagonal(&self) -> Self {
        Covariance::Diagonal {
            variances: (0..self.dim()).map(|i| self.variance(i)).collect(),
        }
    }

    /// `xᵀΣx` for the incidence vector of `arcs`, floored at zero.
    pub fn quadratic_form(&self, arcs: &[usize]) -> T {
        let q: T = match self {
            Covariance::Diagonal { variances } => arcs.iter().map(|&a| variances[a]).sum(),
            Covariance::Dense { n, values } => arcs
                .iter()
                .map(|&a| arcs.iter().map(|&b| values[a * n + b]).sum::<T>())
                .sum(),
        };
        q.max(T::zero())
    }

    /// True when no entry is negative, so `xᵀΣx` can only grow as arcs are added.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Covariance::Dense { values, .. } => values.iter().all(|v| *v >= T::zero()),
            Covariance::Diagonal { variances } => variances.iter().all(|v| *v >= T::zero()),
        }
    }
}

/// Fitted uncertainty set with its size parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UncertaintyModel<T> {
    ConvexHull {
        scenarios: Arc<ScenarioMatrix<T>>,
        lambda: T,
    },
    Interval {
        lower: CostVector<T>,
        upper: CostVector<T>,
        lambda: T,
    },
    Ellipsoid {
        mu: CostVector<T>,
        sigma: Arc<Covariance<T>>,
        lambda: T,
        diagonal_only: bool,
    },
    Budgeted {
        c_hat: CostVector<T>,
        c_bar: CostVector<T>,
        gamma: T,
    },
    Owa {
        scenarios: Arc<ScenarioMatrix<T>>,
        q: Vec<T>,
    },
}

/// Model plus the content hash of the scenario data it was fitted on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord<T> {
    pub source_hash: String,
    pub model: UncertaintyModel<T>,
}

impl<T: Scalar> ModelRecord<T> {
    pub fn new(source: &ScenarioMatrix<T>, model: UncertaintyModel<T>) -> Self {
        Self {
            source_hash: source.content_hash(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn require_nonempty<T: Scalar>(r: &ScenarioMatrix<T>) -> Result<()> {
    if r.scenario_count() == 0 {
        Err(Error::DegenerateData("scenario matrix has no rows".into()))
    } else {
        Ok(())
    }
}

fn require_size<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v.is_finite() && v >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

/// Componentwise arithmetic mean of the scenarios.
pub fn mean_scenario<T: Scalar>(r: &ScenarioMatrix<T>) -> Result<CostVector<T>> {
    require_nonempty(r)?;
    let count = T::from_usize(r.scenario_count()).expect("scenario count fits scalar");
    let mut sum = vec![T::zero(); r.arc_count()];
    for row in r.rows() {
        for (s, &v) in sum.iter_mut().zip(row) {
            *s = *s + v;
        }
    }
    Ok(CostVector::clamped(
        sum.into_iter().map(|s| s / count).collect(),
    ))
}

/// Replaces every scenario `c` by `ĉ + λ(c − ĉ)`, clamped at zero.
pub fn scale_scenarios<T: Scalar>(r: &ScenarioMatrix<T>, lambda: T) -> Result<ScenarioMatrix<T>> {
    require_size("lambda", lambda)?;
    let mean = mean_scenario(r)?;
    let values = r
        .rows()
        .flat_map(|row| {
            row.iter()
                .zip(mean.iter())
                .map(|(&c, &m)| (m + lambda * (c - m)).max(T::zero()))
                .collect::<Vec<_>>()
        })
        .collect();
    ScenarioMatrix::new(
        r.scenario_count(),
        r.arc_count(),
        values,
        Some(r.labels().to_vec()),
    )
}

/// Per-arc box `[mid − λ·half, mid + λ·half]` around the data range, lower bound clamped at zero.
pub fn interval_bounds<T: Scalar>(
    r: &ScenarioMatrix<T>,
    lambda: T,
) -> Result<(CostVector<T>, CostVector<T>)> {
    require_nonempty(r)?;
    require_size("lambda", lambda)?;
    let (lo, hi) = column_min_max(r);
    let two = T::lit(2.0);
    let mut lower = Vec::with_capacity(lo.len());
    let mut upper = Vec::with_capacity(lo.len());
    for (&l, &h) in lo.iter().zip(&hi) {
        let mid = (h + l) / two;
        let half = (h - l) / two;
        lower.push((mid - lambda * half).max(T::zero()));
        upper.push(mid + lambda * half);
    }
    Ok((CostVector::clamped(lower), CostVector::clamped(upper)))
}

fn column_min_max<T: Scalar>(r: &ScenarioMatrix<T>) -> (Vec<T>, Vec<T>) {
    let mut lo = vec![T::infinity(); r.arc_count()];
    let mut hi = vec![T::neg_infinity(); r.arc_count()];
    for row in r.rows() {
        for (a, &v) in row.iter().enumerate() {
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    (lo, hi)
}

/// Maximum-likelihood normal fit: sample mean and population (1/N) covariance.
pub fn fit_ellipsoid<T: Scalar>(r: &ScenarioMatrix<T>) -> Result<(CostVector<T>, Covariance<T>)> {
    if r.scenario_count() < 2 {
        return Err(Error::DegenerateData(format!(
            "ellipsoid fit needs at least 2 scenarios, got {}",
            r.scenario_count()
        )));
    }
    let mu = mean_scenario(r)?;
    let n = r.arc_count();
    let count = T::from_usize(r.scenario_count()).expect("scenario count fits scalar");
    let mut values = vec![T::zero(); n * n];
    let mut dev = vec![T::zero(); n];
    for row in r.rows() {
        for (d, (&c, &m)) in dev.iter_mut().zip(row.iter().zip(mu.iter())) {
            *d = c - m;
        }
        for i in 0..n {
            let di = dev[i];
            if di == T::zero() {
                continue;
            }
            // upper triangle only, mirrored below
            for j in i..n {
                values[i * n + j] = values[i * n + j] + di * dev[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = values[i * n + j] / count;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok((mu, Covariance::Dense { n, values }))
}

/// The `j`-th column of the CVaR weight matrix: `1/j` on the `j` worst outcomes.
pub fn cvar_weights<T: Scalar>(n: usize, j: usize) -> Result<Vec<T>> {
    if j == 0 || j > n {
        return Err(Error::InvalidParameter(format!(
            "CVaR column {j} outside 1..={n}"
        )));
    }
    let w = T::one() / T::from_usize(j).expect("column fits scalar");
    Ok((0..n).map(|i| if i < j { w } else { T::zero() }).collect())
}

/// The `k`-th column of the symmetric permutohull weight matrix.
///
/// `(2, …, 2, 1, …, 1, 0, …, 0) / N` with `k − 1` twos and `k − 1` zeros.
pub fn sym_weights<T: Scalar>(n: usize, k: usize) -> Result<Vec<T>> {
    if k == 0 || k > n / 2 + 1 {
        return Err(Error::InvalidParameter(format!(
            "symmetric column {k} outside 1..={}",
            n / 2 + 1
        )));
    }
    let nn = T::from_usize(n).expect("scenario count fits scalar");
    let two = T::lit(2.0) / nn;
    let one = T::one() / nn;
    Ok((0..n)
        .map(|i| {
            if i < k - 1 {
                two
            } else if i < n - (k - 1) {
                one
            } else {
                T::zero()
            }
        })
        .collect())
}

/// Ordered weighted average: `Σ q_i · y_[i]` with `y` sorted in decreasing order.
pub fn owa_value<T: Scalar>(y: &[T], q: &[T]) -> T {
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(|a, b| cmp_scalar(*b, *a));
    sorted.iter().zip(q).map(|(&v, &w)| v * w).sum()
}

fn check_owa_weights<T: Scalar>(q: &[T], n: usize) -> Result<()> {
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q.len(),
        });
    }
    if q.iter().any(|w| !w.is_finite() || *w < T::zero()) {
        return Err(Error::InvalidParameter(
            "OWA weights must be nonnegative".into(),
        ));
    }
    if q.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter(
            "OWA weights must be nonincreasing".into(),
        ));
    }
    let sum: T = q.iter().copied().sum();
    let tol = T::epsilon() * T::from_usize(n.max(1) * 8).expect("fits");
    if (sum - T::one()).abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "OWA weights sum to {sum}, not 1"
        )));
    }
    Ok(())
}

impl<T: Scalar> UncertaintyModel<T> {
    pub fn convex_hull(r: &ScenarioMatrix<T>, lambda: T) -> Result<Self> {
        Ok(UncertaintyModel::ConvexHull {
            scenarios: Arc::new(scale_scenarios(r, lambda)?),
            lambda,
        })
    }

    pub fn interval(r: &ScenarioMatrix<T>, lambda: T) -> Result<Self> {
        let (lower, upper) = interval_bounds(r, lambda)?;
        Ok(UncertaintyModel::Interval {
            lower,
            upper,
            lambda,
        })
    }

    pub fn ellipsoid(r: &ScenarioMatrix<T>, lambda: T, diagonal_only: bool) -> Result<Self> {
        require_size("lambda", lambda)?;
        let (mu, sigma) = fit_ellipsoid(r)?;
        let sigma = if diagonal_only {
            sigma.diagonal()
        } else {
            sigma
        };
        Ok(Self::ellipsoid_from_fit(mu, Arc::new(sigma), lambda))
    }

    /// Reuses an existing fit; `diagonal_only` follows the covariance representation.
    pub fn ellipsoid_from_fit(mu: CostVector<T>, sigma: Arc<Covariance<T>>, lambda: T) -> Self {
        let diagonal_only = sigma.is_diagonal();
        UncertaintyModel::Ellipsoid {
            mu,
            sigma,
            lambda,
            diagonal_only,
        }
    }

    /// Deviations run from the scenario mean up to the raw per-arc maximum.
    pub fn budgeted(r: &ScenarioMatrix<T>, gamma: T) -> Result<Self> {
        require_size("gamma", gamma)?;
        let c_hat = mean_scenario(r)?;
        let (_, hi) = column_min_max(r);
        let c_bar = CostVector::clamped(
            hi.into_iter()
                .zip(c_hat.iter())
                .map(|(h, &m)| h.max(m))
                .collect(),
        );
        Ok(UncertaintyModel::Budgeted {
            c_hat,
            c_bar,
            gamma,
        })
    }

    pub fn owa(r: Arc<ScenarioMatrix<T>>, q: Vec<T>) -> Result<Self> {
        require_nonempty(&r)?;
        check_owa_weights(&q, r.scenario_count())?;
        Ok(UncertaintyModel::Owa { scenarios: r, q })
    }

    /// CVaR-induced permutohull using column `j` of the weight matrix.
    pub fn permutohull(r: Arc<ScenarioMatrix<T>>, j: usize) -> Result<Self> {
        let q = cvar_weights(r.scenario_count(), j)?;
        Self::owa(r, q)
    }

    pub fn symmetric_permutohull(r: Arc<ScenarioMatrix<T>>, k: usize) -> Result<Self> {
        let q = sym_weights(r.scenario_count(), k)?;
        Self::owa(r, q)
    }

    pub fn arc_count(&self) -> usize {
        match self {
            UncertaintyModel::ConvexHull { scenarios, .. }
            | UncertaintyModel::Owa { scenarios, .. } => scenarios.arc_count(),
            UncertaintyModel::Interval { upper, .. } => upper.len(),
            UncertaintyModel::Ellipsoid { mu, .. } => mu.len(),
            UncertaintyModel::Budgeted { c_hat, .. } => c_hat.len(),
        }
    }

    /// Scenario data and weights when the model is evaluated as an ordered weighted average.
    pub fn owa_parts(&self) -> Option<(&ScenarioMatrix<T>, Vec<T>)> {
        match self {
            UncertaintyModel::ConvexHull { scenarios, .. } => {
                let n = scenarios.scenario_count();
                let q = (0..n)
                    .map(|i| if i == 0 { T::one() } else { T::zero() })
                    .collect();
                Some((scenarios, q))
            }
            UncertaintyModel::Owa { scenarios, q } => Some((scenarios, q.clone())),
            _ => None,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            UncertaintyModel::ConvexHull { .. } => "convex_hull",
            UncertaintyModel::Interval { .. } => "interval",
            UncertaintyModel::Ellipsoid { .. } => "ellipsoid",
            UncertaintyModel::Budgeted { .. } => "budgeted",
            UncertaintyModel::Owa { .. } => "owa",
        }
    }
}

/// `max_{c ∈ U} c·x` for the incidence vector `x` of `path`.
pub fn worst_case_value<T: Scalar>(model: &UncertaintyModel<T>, path: &Path) -> Result<T> {
    let n = model.arc_count();
    if let Some(&bad) = path.arcs().iter().find(|&&a| a >= n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad + 1,
        });
    }
    let arcs = path.arcs();
    Ok(match model {
        UncertaintyModel::Interval { upper, .. } => arcs.iter().map(|&a| upper[a]).sum(),
        UncertaintyModel::ConvexHull { scenarios, .. } => scenarios
            .path_costs(path)
            .into_iter()
            .fold(T::neg_infinity(), T::max),
        UncertaintyModel::Owa { scenarios, q } => owa_value(&scenarios.path_costs(path), q),
        UncertaintyModel::Ellipsoid {
            mu, sigma, lambda, ..
        } => {
            let mean: T = arcs.iter().map(|&a| mu[a]).sum();
            mean + (*lambda * sigma.quadratic_form(arcs)).sqrt()
        }
        UncertaintyModel::Budgeted {
            c_hat,
            c_bar,
            gamma,
        } => {
            let nominal: T = arcs.iter().map(|&a| c_hat[a]).sum();
            let devs: Vec<T> = arcs.iter().map(|&a| c_bar[a] - c_hat[a]).collect();
            nominal + budgeted_deviation(devs, *gamma)
        }
    })
}

/// Largest total deviation with at most `gamma` (possibly fractional) coordinates raised.
pub(crate) fn budgeted_deviation<T: Scalar>(mut devs: Vec<T>, gamma: T) -> T {
    devs.sort_unstable_by(|a, b| cmp_scalar(*b, *a));
    let whole = gamma.floor().to_usize().unwrap_or(usize::MAX);
    let frac = gamma - gamma.floor();
    let mut total: T = devs.iter().take(whole).copied().sum();
    if let Some(&next) = devs.get(whole) {
        total = total + frac * next;
    }
    total
}

/// The robust-set families compared in the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "ch")]
    ConvexHull,
    #[serde(rename = "interval")]
    Interval,
    #[serde(rename = "ellipsoid")]
    Ellipsoid,
    #[serde(rename = "ellipsoid-diag")]
    EllipsoidDiag,
    #[serde(rename = "budgeted")]
    Budgeted,
    #[serde(rename = "ph")]
    Permutohull,
    #[serde(rename = "sph")]
    SymPermutohull,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::ConvexHull,
        Family::Interval,
        Family::Ellipsoid,
        Family::EllipsoidDiag,
        Family::Budgeted,
        Family::Permutohull,
        Family::SymPermutohull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::ConvexHull => "ch",
            Family::Interval => "interval",
            Family::Ellipsoid => "ellipsoid",
            Family::EllipsoidDiag => "ellipsoid-diag",
            Family::Budgeted => "budgeted",
            Family::Permutohull => "ph",
            Family::SymPermutohull => "sph",
        }
    }

    /// Permutohull families take an integer column index as their parameter.
    pub fn has_column_param(self) -> bool {
        matches!(self, Family::Permutohull | Family::SymPermutohull)
    }

    /// Builds the model of this family from training scenarios.
    pub fn build<T: Scalar>(
        self,
        train: &Arc<ScenarioMatrix<T>>,
        param: T,
    ) -> Result<UncertaintyModel<T>> {
        match self {
            Family::ConvexHull => UncertaintyModel::convex_hull(train, param),
            Family::Interval => UncertaintyModel::interval(train, param),
            Family::Ellipsoid => UncertaintyModel::ellipsoid(train, param, false),
            Family::EllipsoidDiag => UncertaintyModel::ellipsoid(train, param, true),
            Family::Budgeted => UncertaintyModel::budgeted(train, param),
            Family::Permutohull => {
                UncertaintyModel::permutohull(train.clone(), column_index(param)?)
            }
            Family::SymPermutohull => {
                UncertaintyModel::symmetric_permutohull(train.clone(), column_index(param)?)
            }
        }
    }

    /// Largest admissible parameter for column families given the training scenario count.
    pub fn max_column(self, train_scenarios: usize) -> Option<usize> {
        match self {
            Family::Permutohull => Some(train_scenarios),
            Family::SymPermutohull => Some(train_scenarios / 2 + 1),
            _ => None,
        }
    }
}

fn column_index<T: Scalar>(param: T) -> Result<usize> {
    if param.fract() != T::zero() || param < T::one() {
        return Err(Error::InvalidParameter(format!(
            "column index must be a positive integer, got {param}"
        )));
    }
    param
        .to_usize()
        .ok_or_else(|| Error::InvalidParameter(format!("column index {param} too large")))
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}
