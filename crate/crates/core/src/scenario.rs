//! Raw multi-scenario travel-time data.

use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{CostVector, Path};
use crate::scalar::Scalar;

/// N×n matrix of travel times: one row per scenario, one column per arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatrix<T> {
    scenario_count: usize,
    arc_count: usize,
    values: Vec<T>,
    labels: Vec<i64>,
}

impl<T: Scalar> ScenarioMatrix<T> {
    /// `values` is row-major (scenario-major). Labels default to 0..N when `None`.
    pub fn new(
        scenario_count: usize,
        arc_count: usize,
        values: Vec<T>,
        labels: Option<Vec<i64>>,
    ) -> Result<Self> {
        if values.len() != scenario_count * arc_count {
            return Err(Error::DimensionMismatch {
                expected: scenario_count * arc_count,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidCosts(format!(
                "scenario {} arc {} is {}",
                pos / arc_count.max(1),
                pos % arc_count.max(1),
                values[pos]
            )));
        }
        let labels = labels.unwrap_or_else(|| (0..scenario_count as i64).collect());
        if labels.len() != scenario_count {
            return Err(Error::DimensionMismatch {
                expected: scenario_count,
                found: labels.len(),
            });
        }
        Ok(Self {
            scenario_count,
            arc_count,
            values,
            labels,
        })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let count = rows.len();
        Self::new(count, n, rows.into_iter().flatten().collect(), None)
    }

    pub fn scenario_count(&self) -> usize {
        self.scenario_count
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.arc_count..(i + 1) * self.arc_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.scenario_count).map(move |i| self.row(i))
    }

    pub fn get(&self, scenario: usize, arc: usize) -> T {
        self.values[scenario * self.arc_count + arc]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Scenario `i` as a cost vector.
    pub fn scenario(&self, i: usize) -> CostVector<T> {
        CostVector::clamped(self.row(i).to_vec())
    }

    /// Keeps the given scenario rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.arc_count);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            scenario_count: rows.len(),
            arc_count: self.arc_count,
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Cost of `path` in every scenario.
    pub fn path_costs(&self, path: &Path) -> Vec<T> {
        self.rows()
            .map(|row| path.arcs().iter().map(|&a| row[a]).sum())
            .collect()
    }

    /// SHA-256 over the dimensions and the f64 bit patterns of all entries.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.scenario_count as u64).to_le_bytes());
        h.update((self.arc_count as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.as_f64().to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes the arc-major CSV: `arc_id,scenario_0,...,scenario_{N-1}`.
    pub fn write_csv(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "arc_id")?;
        for i in 0..self.scenario_count {
            write!(out, ",scenario_{i}")?;
        }
        writeln!(out)?;
        for a in 0..self.arc_count {
            write!(out, "{a}")?;
            for i in 0..self.scenario_count {
                // Display prints the shortest round-tripping representation
                write!(out, ",{}", self.get(i, a))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("arc_id") {
            return Err(Error::Schema {
                row: 1,
                column: headers.get(0).unwrap_or("").to_string(),
                message: "first column must be `arc_id`".into(),
            });
        }
        for (i, h) in headers.iter().skip(1).enumerate() {
            if h != format!("scenario_{i}") {
                return Err(Error::Schema {
                    row: 1,
                    column: h.to_string(),
                    message: format!("expected `scenario_{i}`"),
                });
            }
        }
        let scenario_count = headers.len() - 1;
        let mut columns: Vec<Vec<T>> = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            let row = r + 2;
            let arc: usize = record
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Schema {
                    row,
                    column: "arc_id".into(),
                    message: "not an integer".into(),
                })?;
            if arc != columns.len() {
                return Err(Error::Schema {
                    row,
                    column: "arc_id".into(),
                    message: format!("expected arc {}, found {arc}", columns.len()),
                });
            }
            let mut col = Vec::with_capacity(scenario_count);
            for i in 0..scenario_count {
                let v = record
                    .get(i + 1)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .and_then(T::from_f64)
                    .ok_or_else(|| Error::Schema {
                        row,
                        column: format!("scenario_{i}"),
                        message: "not a number".into(),
                    })?;
                col.push(v);
            }
            columns.push(col);
        }
        let arc_count = columns.len();
        let mut values = vec![T::zero(); scenario_count * arc_count];
        for (a, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * arc_count + a] = v;
            }
        }
        Self::new(scenario_count, arc_count, values, None)
    }
}
