//! Planar convex hulls for two-pair rate regions.

/// A point in the (pair-1 rate, pair-2 rate) plane.
pub type Point = [f64; 2];

/// Slack allowed when testing whether a point lies inside a hull.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain.
///
/// Vertices are returned counter-clockwise starting from the lowest-x
/// (then lowest-y) point, without collinear points. Degenerate inputs give
/// one vertex (all points equal) or the two endpoints (all collinear).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points
        .iter()
        .copied()
        .filter(|p| p[0].is_finite() && p[1].is_finite())
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Hull of the region reachable by time-sharing with silence: the input is
/// augmented with the origin and the axis feet `(max x, 0)` and `(0, max y)`
/// before hulling. Rates are nonnegative, so this is the hull of the input
/// closed under coordinate-wise decrease to zero.
pub fn closed_hull(points: &[Point]) -> Vec<Point> {
    let mut aug = points.to_vec();
    let max_x = points.iter().map(|p| p[0]).fold(0.0, f64::max);
    let max_y = points.iter().map(|p| p[1]).fold(0.0, f64::max);
    aug.push([0.0, 0.0]);
    aug.push([max_x, 0.0]);
    aug.push([0.0, max_y]);
    convex_hull(&aug)
}

/// Shoelace area of a simple polygon given in order.
pub fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * twice.abs()
}

/// Largest violation of the hull's edge half-planes by `p` (negative or zero
/// when inside). For degenerate hulls this is the distance to the segment or
/// point.
pub fn hull_violation(hull: &[Point], p: Point) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => ((p[0] - hull[0][0]).powi(2) + (p[1] - hull[0][1]).powi(2)).sqrt(),
        2 => segment_distance(hull[0], hull[1], p),
        n => {
            let mut worst = f64::NEG_INFINITY;
            for i in 0..n {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                // Signed distance to the right of edge a->b (outside for CCW).
                let d = -cross(a, b, p) / len;
                worst = worst.max(d);
            }
            worst
        }
    }
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + s * ab[0], a[1] + s * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

pub fn hull_contains(hull: &[Point], p: Point, slack: f64) -> bool {
    hull_violation(hull, p) <= slack
}

/// Every vertex of `inner` lies in `outer` within `slack`.
pub fn hull_contains_hull(outer: &[Point], inner: &[Point], slack: f64) -> bool {
    inner.iter().all(|&p| hull_contains(outer, p, slack))
}
