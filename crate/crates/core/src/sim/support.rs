//! Ground-plane support geometry: mass centre, convex support polygon and
//! signed stability margin.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DUP_TOL: f64 = 1e-9;

/// Mass-weighted mean of segment centroids.
pub fn weighted_centroid(masses: &[f64], centroids: &[Vector3<f64>]) -> Vector3<f64> {
    debug_assert_eq!(masses.len(), centroids.len());
    let total: f64 = masses.iter().sum();
    masses.iter().zip(centroids).fold(Vector3::zeros(), |acc, (m, c)| acc + c * *m) / total
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull, counter-clockwise, without collinear vertices. One or two
/// points come back as a point or a segment.
pub fn support_polygon(points: &[Vector2<f64>]) -> Result<Vec<Vector2<f64>>> {
    if points.is_empty() {
        return Err(Error::NoSupport);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < DUP_TOL);
    if pts.len() < 3 {
        return Ok(pts);
    }
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= DUP_TOL {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // all collinear: keep the two extremes
        return Ok(vec![pts[0], *pts.last().expect("non-empty")]);
    }
    Ok(hull)
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// Signed distance from `cog` to the polygon boundary: positive inside,
/// negative outside. Points and segments have no interior, so the margin is
/// never positive for them.
pub fn stability_margin(cog: &Vector2<f64>, polygon: &[Vector2<f64>]) -> f64 {
    match polygon.len() {
        0 => f64::NEG_INFINITY,
        1 => -(cog - polygon[0]).norm(),
        2 => -segment_distance(cog, &polygon[0], &polygon[1]),
        n => {
            let mut inside = true;
            let mut dist = f64::INFINITY;
            for i in 0..n {
                let (a, b) = (&polygon[i], &polygon[(i + 1) % n]);
                if cross(a, b, cog) < 0.0 {
                    inside = false;
                }
                dist = dist.min(segment_distance(cog, a, b));
            }
            if inside {
                dist
            } else {
                -dist
            }
        }
    }
}

pub fn polygon_area(polygon: &[Vector2<f64>]) -> f64 {
    let n = polygon.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub cog: Vector3<f64>,
    pub polygon: Vec<Vector2<f64>>,
    pub margin: f64,
}

pub fn stability_report(cog: Vector3<f64>, contacts: &[Vector2<f64>]) -> Result<StabilityReport> {
    let polygon = support_polygon(contacts)?;
    let margin = stability_margin(&cog.xy(), &polygon);
    Ok(StabilityReport { cog, polygon, margin })
}
