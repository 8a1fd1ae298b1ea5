//! Great-circle lengths, a local planar projection, and endpoint clustering.

/// WGS84 equatorial radius.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Meters per second in one mile per hour.
pub const MPH_TO_MPS: f64 = 0.447_04;

pub fn haversine_m(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Equirectangular projection around a reference latitude, in meters.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    lon0: f64,
    lat0: f64,
    cos_lat0: f64,
}

impl Projection {
    pub fn new(lon0: f64, lat0: f64) -> Self {
        Self {
            lon0,
            lat0,
            cos_lat0: lat0.to_radians().cos(),
        }
    }

    pub fn project(&self, lon: f64, lat: f64) -> [f64; 2] {
        [
            EARTH_RADIUS_M * (lon - self.lon0).to_radians() * self.cos_lat0,
            EARTH_RADIUS_M * (lat - self.lat0).to_radians(),
        ]
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Parameters `(t, u)` of the interior crossing of segments `p0p1` and `q0q1`.
pub fn crossing(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-12 * (r[0].hypot(r[1]) * s[0].hypot(s[1])).max(1e-300) {
        return None;
    }
    let w = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = (w[0] * s[1] - w[1] * s[0]) / denom;
    let u = (w[0] * r[1] - w[1] * r[0]) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((t, u))
}

/// Projection parameter of `p` on segment `a0a1`, clamped to `[0, 1]`, and the distance to it.
pub fn project_onto(p: [f64; 2], a0: [f64; 2], a1: [f64; 2]) -> (f64, f64) {
    let d = [a1[0] - a0[0], a1[1] - a0[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return (0.0, dist(p, a0));
    }
    let t = (((p[0] - a0[0]) * d[0] + (p[1] - a0[1]) * d[1]) / len2).clamp(0.0, 1.0);
    let foot = [a0[0] + t * d[0], a0[1] + t * d[1]];
    (t, dist(p, foot))
}

/// Single-linkage clusters of points within `tolerance`; cluster ids follow first appearance.
pub fn cluster(points: &[[f64; 2]], tolerance: f64) -> Vec<usize> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j][0] - points[i][0] > tolerance {
                break;
            }
            if dist(points[i], points[j]) <= tolerance {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        if ids[root] == usize::MAX {
            ids[root] = next;
            next += 1;
        }
        out.push(ids[root]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equator_hundredth_degree() {
        let d = haversine_m(0.0, 0.0, 0.01, 0.0);
        assert!((d - 1113.195).abs() < 0.01, "{d}");
    }

    #[test]
    fn crossing_of_plus_sign() {
        let (t, u) = crossing([-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 3.0]).unwrap();
        assert_eq!(t, 0.5);
        assert_eq!(u, 0.25);
        assert!(crossing([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]).is_none());
        assert!(crossing([0.0, 0.0], [1.0, 0.0], [2.0, -1.0], [2.0, 1.0]).is_none());
    }

    #[test]
    fn clustering_is_transitive_and_ordered() {
        let pts = [[10.0, 0.0], [0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [50.0, 0.0]];
        assert_eq!(cluster(&pts, 0.6), vec![0, 1, 1, 1, 2]);
        assert_eq!(cluster(&pts, 0.1), vec![0, 1, 2, 3, 4]);
    }
}
