//! Deterministic synthetic road-speed observations shaped like a city
//! arterial grid: a jittered street grid with one- and two-way blocks, a few
//! diagonal avenues that cross grid blocks, rush-hour slowdowns, noisy
//! readings, missing readings, and segments that never report.

use std::f64::consts::PI;
use std::fs::File;
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ObservationRecord, OBSERVATION_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CityConfig {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Block length in meters.
    pub spacing_m: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    /// Intersection position jitter in meters.
    pub node_jitter_m: f64,
    /// Per-segment endpoint jitter in meters, to be absorbed by snapping.
    pub endpoint_jitter_m: f64,
    /// Probability a grid block carries traffic at all.
    pub keep_block: f64,
    /// Probability a kept block is two-way.
    pub two_way: f64,
    pub diagonals: usize,
    pub epochs: usize,
    pub missing_rate: f64,
    /// Share of segments that never report a speed.
    pub silent_rate: f64,
    pub noise: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            seed: 2017,
            rows: 20,
            cols: 27,
            spacing_m: 805.0,
            origin_lon: -87.78,
            origin_lat: 41.76,
            node_jitter_m: 40.0,
            endpoint_jitter_m: 6.0,
            keep_block: 0.86,
            two_way: 0.5,
            diagonals: 6,
            epochs: 96,
            missing_rate: 0.06,
            silent_rate: 0.02,
            noise: 0.12,
        }
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rows < 2 || self.cols < 2 {
            return bad("grid needs at least 2 rows and 2 columns");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.spacing_m.is_nan() || self.spacing_m <= 0.0 {
            return bad("spacing_m must be positive");
        }
        for (name, p) in [
            ("keep_block", self.keep_block),
            ("two_way", self.two_way),
            ("missing_rate", self.missing_rate),
            ("silent_rate", self.silent_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1)");
        }
        if [self.node_jitter_m, self.endpoint_jitter_m]
            .iter()
            .any(|j| j.is_nan() || *j < 0.0)
        {
            return bad("jitter must be non-negative");
        }
        Ok(())
    }
}

struct Street {
    from: [f64; 2],
    to: [f64; 2],
    free_mph: f64,
    /// Heading toward the grid center, which slows in the morning peak.
    inbound: bool,
    peak_drop: f64,
}

/// Observation records for a synthetic city, grouped by segment then epoch.
pub fn generate_city(config: &CityConfig) -> Result<Vec<ObservationRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let deg_lat = config.spacing_m / 111_320.0;
    let deg_lon = deg_lat / config.origin_lat.to_radians().cos();
    let jitter_deg = |rng: &mut ChaCha8Rng, meters: f64| {
        let m = meters / 111_320.0;
        [
            rng.gen_range(-m..=m) / config.origin_lat.to_radians().cos(),
            rng.gen_range(-m..=m),
        ]
    };
    let mut nodes = Vec::with_capacity(config.rows * config.cols);
    for r in 0..config.rows {
        for c in 0..config.cols {
            let j = jitter_deg(&mut rng, config.node_jitter_m);
            nodes.push([
                config.origin_lon + c as f64 * deg_lon + j[0],
                config.origin_lat + r as f64 * deg_lat + j[1],
            ]);
        }
    }
    let at = |r: usize, c: usize| r * config.cols + c;
    let center = [
        (config.rows - 1) as f64 / 2.0,
        (config.cols - 1) as f64 / 2.0,
    ];

    let mut streets = Vec::new();
    let mut block = |rng: &mut ChaCha8Rng, a: (usize, usize), b: (usize, usize), arterial: bool| {
        if !rng.gen_bool(config.keep_block) {
            return;
        }
        let free_mph = if arterial {
            rng.gen_range(28.0..36.0)
        } else {
            rng.gen_range(20.0..30.0)
        };
        let dist_to_center =
            |p: (usize, usize)| (p.0 as f64 - center[0]).abs() + (p.1 as f64 - center[1]).abs();
        let peak_drop = rng.gen_range(0.15..0.55);
        let forward = Street {
            from: nodes[at(a.0, a.1)],
            to: nodes[at(b.0, b.1)],
            free_mph,
            inbound: dist_to_center(b) < dist_to_center(a),
            peak_drop,
        };
        let reverse = Street {
            from: forward.to,
            to: forward.from,
            free_mph,
            inbound: !forward.inbound,
            peak_drop,
        };
        if rng.gen_bool(config.two_way) {
            streets.push(forward);
            streets.push(reverse);
        } else if rng.gen_bool(0.5) {
            streets.push(forward);
        } else {
            streets.push(reverse);
        }
    };
    for r in 0..config.rows {
        for c in 0..config.cols {
            if c + 1 < config.cols {
                block(&mut rng, (r, c), (r, c + 1), r % 4 == 0);
            }
            if r + 1 < config.rows {
                block(&mut rng, (r, c), (r + 1, c), c % 4 == 0);
            }
        }
    }
    // diagonals cross the middle of a horizontal block and get split there
    for _ in 0..config.diagonals {
        let r = rng.gen_range(0..config.rows.saturating_sub(2).max(1));
        let c = rng.gen_range(0..config.cols - 1);
        if r + 2 >= config.rows {
            continue;
        }
        let (from, to) = (nodes[at(r, c)], nodes[at(r + 2, c + 1)]);
        let inbound = rng.gen_bool(0.5);
        let free_mph = rng.gen_range(28.0..36.0);
        let peak_drop = rng.gen_range(0.15..0.55);
        streets.push(Street {
            from,
            to,
            free_mph,
            inbound,
            peak_drop,
        });
        streets.push(Street {
            from: to,
            to: from,
            free_mph,
            inbound: !inbound,
            peak_drop,
        });
    }

    let mut out = Vec::with_capacity(streets.len() * config.epochs);
    for (k, s) in streets.iter().enumerate() {
        let silent = rng.gen_bool(config.silent_rate);
        let j0 = jitter_deg(&mut rng, config.endpoint_jitter_m);
        let j1 = jitter_deg(&mut rng, config.endpoint_jitter_m);
        for e in 0..config.epochs {
            let hour = 24.0 * e as f64 / config.epochs as f64;
            let bump = |h0: f64| (-(hour - h0).powi(2) / 2.0).exp();
            let (am, pm) = if s.inbound { (1.0, 0.6) } else { (0.6, 1.0) };
            let night = 0.08 * (2.0 * PI * (hour - 3.0) / 24.0).cos();
            let slow = s.peak_drop * (am * bump(8.0) + pm * bump(17.0)).min(1.0);
            let factor = (1.0 - slow + night) * (1.0 + rng.gen_range(-config.noise..=config.noise));
            let reading = (s.free_mph * factor).max(2.0);
            let missing = silent || rng.gen_bool(config.missing_rate);
            out.push(ObservationRecord {
                segment_id: format!("seg{k:05}"),
                time_index: e as i64,
                speed_mph: (!missing).then_some((reading * 100.0).round() / 100.0),
                start_lon: s.from[0] + j0[0],
                start_lat: s.from[1] + j0[1],
                end_lon: s.to[0] + j1[0],
                end_lat: s.to[1] + j1[1],
            });
        }
    }
    Ok(out)
}

pub fn write_observations(path: impl AsRef<FsPath>, records: &[ObservationRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_observations_to(file, records)
}

pub fn write_observations_to(
    writer: impl std::io::Write,
    records: &[ObservationRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OBSERVATION_HEADER)?;
    for r in records {
        let speed = r.speed_mph.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            r.segment_id.as_str(),
            &r.time_index.to_string(),
            &speed,
            &format!("{:.7}", r.start_lon),
            &format!("{:.7}", r.start_lat),
            &format!("{:.7}", r.end_lon),
            &format!("{:.7}", r.end_lat),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
