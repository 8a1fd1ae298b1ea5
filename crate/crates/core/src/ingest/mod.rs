//! Raw per-segment speed observations to a road graph and a complete
//! scenario matrix of travel times.
//!
//! Pipeline: parse the observation CSV, drop segments never observed, split
//! segments where they cross or nearly touch another segment, merge
//! endpoints closer than the snapping tolerance into nodes, fill speed gaps
//! per segment by linear interpolation over the epoch ordinal, and convert
//! speeds to travel times along each arc.

pub mod geometry;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::Path as FsPath;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scenario::ScenarioMatrix;

use geometry::{cluster, crossing, haversine_m, project_onto, Projection, MPH_TO_MPS};

pub const DEFAULT_SNAP_TOLERANCE_M: f64 = 30.0;

/// Segments meeting at less than about 5 degrees are treated as parallel and
/// do not split each other where they cross.
const MIN_CROSSING_SINE: f64 = 0.087;

/// Points this close are one node even at zero tolerance, so a crossing
/// computed from either segment lands on the same node.
const POINT_EPSILON_M: f64 = 1e-6;

fn crossing_sine(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> f64 {
    let r = [a1[0] - a0[0], a1[1] - a0[1]];
    let s = [b1[0] - b0[0], b1[1] - b0[1]];
    (r[0] * s[1] - r[1] * s[0]).abs() / (r[0].hypot(r[1]) * s[0].hypot(s[1]))
}

pub const OBSERVATION_HEADER: [&str; 7] = [
    "segment_id",
    "time_index",
    "speed_mph",
    "start_lon",
    "start_lat",
    "end_lon",
    "end_lat",
];

/// One speed reading of one segment at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationRecord {
    pub segment_id: String,
    pub time_index: i64,
    pub speed_mph: Option<f64>,
    pub start_lon: f64,
    pub start_lat: f64,
    pub end_lon: f64,
    pub end_lat: f64,
}

pub fn parse_observations(path: impl AsRef<FsPath>) -> Result<Vec<ObservationRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_observations(file)
}

/// Parses the observation CSV. Empty, unparseable or non-positive speeds are missing.
pub fn read_observations(reader: impl std::io::Read) -> Result<Vec<ObservationRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    for (i, want) in OBSERVATION_HEADER.iter().enumerate() {
        if header.get(i) != Some(*want) {
            return Err(Error::Schema {
                row: 1,
                column: header.get(i).unwrap_or("<missing>").to_string(),
                message: format!("expected column {} to be `{want}`", i + 1),
            });
        }
    }
    if header.len() != OBSERVATION_HEADER.len() {
        return Err(Error::Schema {
            row: 1,
            column: header
                .get(OBSERVATION_HEADER.len())
                .unwrap_or("")
                .to_string(),
            message: format!("expected {} columns", OBSERVATION_HEADER.len()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let schema = |c: usize, message: &str| Error::Schema {
            row,
            column: OBSERVATION_HEADER[c].to_string(),
            message: message.to_string(),
        };
        let segment_id = field(0).to_string();
        if segment_id.is_empty() {
            return Err(schema(0, "empty segment id"));
        }
        let time_index = field(1)
            .parse::<i64>()
            .map_err(|_| schema(1, "not an integer"))?;
        let speed_mph = field(2)
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite() && *s > 0.0);
        let mut coords = [0.0; 4];
        for (k, c) in coords.iter_mut().enumerate() {
            *c = field(3 + k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(3 + k, "not a finite number"))?;
        }
        out.push(ObservationRecord {
            segment_id,
            time_index,
            speed_mph,
            start_lon: coords[0],
            start_lat: coords[1],
            end_lon: coords[2],
            end_lat: coords[3],
        });
    }
    Ok(out)
}

/// Fills gaps in a time-ordered series.
///
/// Interior gaps are interpolated linearly in `times`; leading and trailing
/// gaps take the nearest observed value.
pub fn interpolate_series(times: &[i64], values: &[Option<f64>]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let known: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let (&first, &last) = match (known.first(), known.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptySeries),
    };
    let mut out = Vec::with_capacity(values.len());
    let mut k = 0;
    for i in 0..values.len() {
        let v = match values[i] {
            Some(v) => v,
            None if i < first => values[first].unwrap(),
            None if i > last => values[last].unwrap(),
            None => {
                while known[k + 1] < i {
                    k += 1;
                }
                let (a, b) = (known[k], known[k + 1]);
                let (va, vb) = (values[a].unwrap(), values[b].unwrap());
                let span = (times[b] - times[a]) as f64;
                let w = (times[i] - times[a]) as f64 / span;
                va + w * (vb - va)
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// Where an arc came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcOrigin {
    pub segment_id: String,
    /// Index into [`GraphBuild::segments`].
    pub segment: usize,
    pub length_m: f64,
}

/// A retained segment: geometry plus its raw speed series keyed by epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub speeds: Vec<(i64, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: Graph,
    pub arcs: Vec<ArcOrigin>,
    pub segments: Vec<Segment>,
    /// Segments dropped because no speed was ever recorded.
    pub dropped_segments: Vec<String>,
}

fn group_segments(records: &[ObservationRecord]) -> (Vec<Segment>, Vec<String>) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut segs: Vec<Segment> = Vec::new();
    for r in records {
        let i = *index.entry(r.segment_id.as_str()).or_insert_with(|| {
            segs.push(Segment {
                id: r.segment_id.clone(),
                start: [r.start_lon, r.start_lat],
                end: [r.end_lon, r.end_lat],
                speeds: Vec::new(),
            });
            segs.len() - 1
        });
        segs[i].speeds.push((r.time_index, r.speed_mph));
    }
    let (kept, dropped): (Vec<_>, Vec<_>) = segs
        .into_iter()
        .partition(|s| s.speeds.iter().any(|(_, v)| v.is_some()));
    (kept, dropped.into_iter().map(|s| s.id).collect())
}

/// Builds the road graph from segment geometry.
///
/// Segments are directed start→end. A segment is split where it properly
/// crosses another segment and where another segment's endpoint lies within
/// `snap_tolerance` meters of its interior. All endpoints and split points
/// within `snap_tolerance` of each other (single linkage) become one node.
/// Nearly parallel segments, such as the two directions of one block, do
/// not split each other where they cross.
pub fn build_graph(records: &[ObservationRecord], snap_tolerance: f64) -> Result<GraphBuild> {
    if records.is_empty() {
        return Err(Error::DegenerateData("no observation records".into()));
    }
    if !(snap_tolerance >= 0.0 && snap_tolerance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "snap tolerance must be finite and >= 0, got {snap_tolerance}"
        )));
    }
    let (segments, dropped_segments) = group_segments(records);
    if segments.is_empty() {
        return Err(Error::DegenerateData(
            "no segment has any speed observation".into(),
        ));
    }
    let count = segments.len() as f64;
    let lon0 = segments.iter().map(|s| s.start[0] + s.end[0]).sum::<f64>() / (2.0 * count);
    let lat0 = segments.iter().map(|s| s.start[1] + s.end[1]).sum::<f64>() / (2.0 * count);
    let proj = Projection::new(lon0, lat0);
    let planar: Vec<([f64; 2], [f64; 2])> = segments
        .iter()
        .map(|s| {
            (
                proj.project(s.start[0], s.start[1]),
                proj.project(s.end[0], s.end[1]),
            )
        })
        .collect();

    // split parameters per segment; the candidates do not depend on the
    // tolerance except through the T-junction distance test, which keeps the
    // node count non-increasing in the tolerance
    let mut splits: Vec<Vec<f64>> = vec![Vec::new(); segments.len()];
    let interior = |t: f64| t > 0.0 && t < 1.0;
    for (i, &(a0, a1)) in planar.iter().enumerate() {
        for (j, &(b0, b1)) in planar.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some((t, u)) = crossing(a0, a1, b0, b1) {
                if interior(t) && interior(u) && crossing_sine(a0, a1, b0, b1) >= MIN_CROSSING_SINE
                {
                    splits[i].push(t);
                }
            }
            for p in [b0, b1] {
                let (t, d) = project_onto(p, a0, a1);
                if d <= snap_tolerance && interior(t) {
                    splits[i].push(t);
                }
            }
        }
        splits[i].sort_by(f64::total_cmp);
        splits[i].dedup();
    }

    // points in order: per segment start, splits, end
    let mut points = Vec::new();
    let mut lonlat = Vec::new();
    let mut ranges = Vec::with_capacity(segments.len());
    for (i, s) in segments.iter().enumerate() {
        let begin = points.len();
        let (a0, a1) = planar[i];
        let mut ts = vec![0.0];
        ts.extend(&splits[i]);
        ts.push(1.0);
        for t in ts {
            points.push([a0[0] + t * (a1[0] - a0[0]), a0[1] + t * (a1[1] - a0[1])]);
            lonlat.push([
                s.start[0] + t * (s.end[0] - s.start[0]),
                s.start[1] + t * (s.end[1] - s.start[1]),
            ]);
        }
        ranges.push(begin..points.len());
    }
    let node_of = cluster(&points, snap_tolerance.max(POINT_EPSILON_M));
    let node_count = node_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut coords = vec![[f64::NAN; 2]; node_count];
    for (p, &n) in node_of.iter().enumerate() {
        if coords[n][0].is_nan() {
            coords[n] = lonlat[p];
        }
    }

    let mut arcs = Vec::new();
    let mut origins = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        let r = ranges[i].clone();
        if node_of[r.start] == node_of[r.end - 1] {
            return Err(Error::DegenerateGeometry(format!(
                "segment `{}` collapses to a single node at tolerance {snap_tolerance} m",
                s.id
            )));
        }
        for p in r.start..r.end - 1 {
            let (u, v) = (node_of[p], node_of[p + 1]);
            if u == v {
                continue;
            }
            arcs.push((u, v));
            origins.push(ArcOrigin {
                segment_id: s.id.clone(),
                segment: i,
                length_m: haversine_m(
                    lonlat[p][0],
                    lonlat[p][1],
                    lonlat[p + 1][0],
                    lonlat[p + 1][1],
                ),
            });
        }
    }
    let graph = Graph::new(node_count, arcs)?.with_coords(coords)?;
    Ok(GraphBuild {
        graph,
        arcs: origins,
        segments,
        dropped_segments,
    })
}

/// Travel time in seconds of every arc at every epoch.
///
/// Epochs are the distinct `time_index` values of the retained segments in
/// increasing order; they become the scenario rows and their labels.
pub fn to_travel_times(build: &GraphBuild) -> Result<ScenarioMatrix<f64>> {
    let epochs: Vec<i64> = build
        .segments
        .iter()
        .flat_map(|s| s.speeds.iter().map(|&(t, _)| t))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot: HashMap<i64, usize> = epochs.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut series = Vec::with_capacity(build.segments.len());
    for s in &build.segments {
        let mut raw = vec![None; epochs.len()];
        for &(t, v) in &s.speeds {
            if v.is_some() {
                raw[slot[&t]] = v;
            }
        }
        series.push(interpolate_series(&epochs, &raw)?);
    }
    let arc_count = build.arcs.len();
    let mut values = vec![0.0; epochs.len() * arc_count];
    for (a, origin) in build.arcs.iter().enumerate() {
        for (e, &mph) in series[origin.segment].iter().enumerate() {
            if mph.is_nan() || mph <= 0.0 {
                return Err(Error::ZeroSpeed {
                    arc: a,
                    scenario: e,
                });
            }
            values[e * arc_count + a] = origin.length_m / (mph * MPH_TO_MPS);
        }
    }
    ScenarioMatrix::new(epochs.len(), arc_count, values, Some(epochs))
}

/// Graph and scenario matrix from raw records.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub build: GraphBuild,
    pub scenarios: ScenarioMatrix<f64>,
}

pub fn ingest_records(records: &[ObservationRecord], snap_tolerance: f64) -> Result<Ingested> {
    let build = build_graph(records, snap_tolerance)?;
    let scenarios = to_travel_times(&build)?;
    Ok(Ingested { build, scenarios })
}
