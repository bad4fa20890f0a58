//! Douglas-Peucker simplification of closed rings.

use super::{GeometryError, LinearRing, Point2, Polygon};

/// Perpendicular distance from `p` to the infinite line through `a` and `b`
/// (or to `a` when the two coincide).
fn line_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return (p.x - a.x).hypot(p.y - a.y);
    }
    ((p.x - a.x) * dy - (p.y - a.y) * dx).abs() / len
}

/// Marks the vertices of the open path `pts[first..=last]` that survive at
/// `tolerance`. The endpoints are assumed kept by the caller.
fn mark_path(pts: &[Point2], first: usize, last: usize, tolerance: f64, keep: &mut [bool]) {
    let mut stack = vec![(first, last)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let mut best = 0.0;
        let mut best_idx = None;
        for i in lo + 1..hi {
            let d = line_distance(pts[i], pts[lo], pts[hi % pts.len()]);
            if d > best {
                best = d;
                best_idx = Some(i);
            }
        }
        if let Some(i) = best_idx.filter(|_| best > tolerance) {
            keep[i % pts.len()] = true;
            stack.push((i, hi));
            stack.push((lo, i));
        }
    }
}

/// Simplifies one closed ring and returns the surviving vertices in their
/// original order.
///
/// The ring is split at vertex 0 and at the vertex farthest from it; both
/// halves are simplified as open paths. Returned points are always a subset
/// of the input and may number fewer than three.
pub fn simplify_ring(ring: &LinearRing, tolerance: f64) -> Vec<Point2> {
    let pts = ring.vertices();
    let n = pts.len();
    let origin = pts[0];
    let mut split = 0;
    let mut far = 0.0;
    for (i, p) in pts.iter().enumerate().skip(1) {
        let d = (p.x - origin.x).hypot(p.y - origin.y);
        if d > far {
            far = d;
            split = i;
        }
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[split] = true;
    mark_path(pts, 0, split, tolerance, &mut keep);
    // The second half wraps around: index `n` stands for vertex 0.
    mark_path(pts, split, n, tolerance, &mut keep);

    let mut out: Vec<Point2> = Vec::with_capacity(n);
    for (p, _) in pts.iter().zip(&keep).filter(|(_, &k)| k) {
        if out.last() != Some(p) {
            out.push(*p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Simplifies every ring independently. Holes that fall below three
/// vertices are dropped; a collapsed exterior is an error.
pub fn simplify_dp(poly: &Polygon, tolerance: f64) -> Result<Polygon, GeometryError> {
    if !(tolerance >= 0.0) {
        return Err(GeometryError::NegativeTolerance(tolerance));
    }
    let ext = simplify_ring(&poly.exterior, tolerance);
    if ext.len() < 3 {
        return Err(GeometryError::ExteriorCollapsed(ext.len()));
    }
    let exterior = LinearRing::new(ext)?;
    let holes = poly
        .holes
        .iter()
        .map(|h| simplify_ring(h, tolerance))
        .filter(|h| h.len() >= 3)
        .map(LinearRing::new)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Polygon::new(exterior, holes))
}
