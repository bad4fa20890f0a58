//! Polygon data model and the label-preserving affine maps used for
//! augmentation.
//!
//! Rings are stored unclosed: the edge from the last vertex back to the first
//! is implicit. All operations are pure and return new values.

mod geojson;
mod simplify;
mod wkt;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geojson::{parse_geojson_features, write_geojson_features, DEFAULT_LABEL_KEY};
pub use simplify::{simplify_dp, simplify_ring};
pub use wkt::{parse_wkt, write_wkt};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("ring has {0} vertices, at least 3 are required")]
    RingTooShort(usize),
    #[error("ring repeats vertex {0} consecutively")]
    DuplicateVertex(usize),
    #[error("scale factors must be positive, got ({0}, {1})")]
    NonPositiveFactor(f64, f64),
    #[error("shear angles must lie strictly inside (-90, 90) degrees, got ({0}, {1})")]
    DegenerateShear(f64, f64),
    #[error("polygon bounding box has zero extent")]
    ZeroExtent,
    #[error("exterior ring collapsed to {0} vertices under simplification")]
    ExteriorCollapsed(usize),
    #[error("negative simplification tolerance {0}")]
    NegativeTolerance(f64),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unsupported geometry type `{0}`")]
    UnsupportedGeometry(String),
    #[error("feature {index} has no `{key}` label property")]
    MissingLabel { index: usize, key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A closed ring of at least three vertices, stored without the repeated
/// closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRing {
    vertices: Vec<Point2>,
}

impl LinearRing {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(p.x, p.y));
        }
        if vertices.len() < 3 {
            return Err(GeometryError::RingTooShort(vertices.len()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(GeometryError::DuplicateVertex(i));
            }
        }
        Ok(Self { vertices })
    }

    /// Builds a ring from `(x, y)` pairs. A trailing vertex equal to the
    /// first one is treated as explicit closure and dropped.
    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self, GeometryError> {
        let mut pts: Vec<Point2> = coords.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        Self::new(pts)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Twice the signed area; positive for counter-clockwise rings.
    pub fn signed_area2(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum()
    }

    fn map(&self, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: LinearRing,
    pub holes: Vec<LinearRing>,
}

impl Polygon {
    pub fn new(exterior: LinearRing, holes: Vec<LinearRing>) -> Self {
        Self { exterior, holes }
    }

    pub fn from_exterior(exterior: LinearRing) -> Self {
        Self {
            exterior,
            holes: Vec::new(),
        }
    }

    /// Exterior first, then holes in stored order.
    pub fn rings(&self) -> impl Iterator<Item = &LinearRing> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn ring_count(&self) -> usize {
        1 + self.holes.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(LinearRing::len).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.rings().flat_map(|r| r.vertices().iter().copied())
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.points() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            exterior: self.exterior.map(&f),
            holes: self.holes.iter().map(|h| h.map(&f)).collect(),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        self.map_points(|p| Point2::new(p.x + dx, p.y + dy))
    }
}

/// Which augmentation produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformTag {
    #[serde(rename = "O")]
    Original,
    #[serde(rename = "R")]
    Rotated,
    #[serde(rename = "SC")]
    Scaled,
    #[serde(rename = "SH")]
    Sheared,
}

impl TransformTag {
    pub const ALL: [TransformTag; 4] = [
        TransformTag::Original,
        TransformTag::Rotated,
        TransformTag::Scaled,
        TransformTag::Sheared,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TransformTag::Original => "O",
            TransformTag::Rotated => "R",
            TransformTag::Scaled => "SC",
            TransformTag::Sheared => "SH",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TransformTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Unweighted mean of every stored vertex over all rings.
pub fn centroid(poly: &Polygon) -> Point2 {
    let n = poly.vertex_count() as f64;
    let (sx, sy) = poly
        .points()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point2::new(sx / n, sy / n)
}

/// Rotates about the vertex centroid; positive angles are counter-clockwise.
pub fn rotate(poly: &Polygon, angle_deg: f64) -> Polygon {
    let c = centroid(poly);
    let (s, co) = angle_deg.to_radians().sin_cos();
    poly.map_points(|p| {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        Point2::new(c.x + co * dx - s * dy, c.y + s * dx + co * dy)
    })
}

pub fn scale(poly: &Polygon, fx: f64, fy: f64) -> Result<Polygon, GeometryError> {
    if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
        return Err(GeometryError::NonPositiveFactor(fx, fy));
    }
    let c = centroid(poly);
    Ok(poly.map_points(|p| Point2::new(c.x + fx * (p.x - c.x), c.y + fy * (p.y - c.y))))
}

/// Shears about the centroid: first along x by `tan(ax)`, then along y by
/// `tan(ay)` using the already sheared x.
pub fn shear(poly: &Polygon, ax_deg: f64, ay_deg: f64) -> Result<Polygon, GeometryError> {
    if !(ax_deg.abs() < 90.0 && ay_deg.abs() < 90.0) {
        return Err(GeometryError::DegenerateShear(ax_deg, ay_deg));
    }
    let c = centroid(poly);
    let (kx, ky) = (ax_deg.to_radians().tan(), ay_deg.to_radians().tan());
    Ok(poly.map_points(|p| {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        let x1 = dx + kx * dy;
        let y1 = dy + ky * x1;
        Point2::new(c.x + x1, c.y + y1)
    }))
}

/// Uniformly scales and centres the bounding box into `[-1, 1]^2`; the
/// longer side spans exactly `[-1, 1]`.
pub fn normalize(poly: &Polygon) -> Result<Polygon, GeometryError> {
    let (lo, hi) = poly.bbox();
    let half = 0.5 * (hi.x - lo.x).max(hi.y - lo.y);
    if !(half > 0.0) {
        return Err(GeometryError::ZeroExtent);
    }
    let (cx, cy) = (0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    Ok(poly.map_points(|p| {
        Point2::new(
            ((p.x - cx) / half).clamp(-1.0, 1.0),
            ((p.y - cy) / half).clamp(-1.0, 1.0),
        )
    }))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn ring(coords: &[(f64, f64)]) -> LinearRing {
        LinearRing::from_coords(coords).unwrap()
    }

    pub fn unit_square() -> Polygon {
        Polygon::from_exterior(ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]))
    }

    pub fn square_with_hole() -> Polygon {
        Polygon::new(
            ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
            vec![ring(&[(0.25, 0.25), (0.25, 0.75), (0.75, 0.75), (0.75, 0.25)])],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn close(a: Point2, b: Point2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    fn polys_close(a: &Polygon, b: &Polygon, tol: f64) -> bool {
        a.ring_count() == b.ring_count()
            && a.vertex_count() == b.vertex_count()
            && a.points().zip(b.points()).all(|(p, q)| close(p, q, tol))
    }

    #[test]
    fn ring_validation() {
        assert_eq!(
            LinearRing::from_coords(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
            Err(GeometryError::RingTooShort(2))
        );
        assert!(matches!(
            LinearRing::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]),
            Err(GeometryError::DuplicateVertex(1))
        ));
        assert!(matches!(
            LinearRing::from_coords(&[(0.0, f64::NAN), (1.0, 0.0), (0.0, 1.0)]),
            Err(GeometryError::NonFinite(..))
        ));
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&unit_square()), Point2::new(0.5, 0.5));
        let tri = Polygon::from_exterior(ring(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]));
        assert_eq!(centroid(&tri), Point2::new(1.0, 1.0));
        assert_eq!(centroid(&square_with_hole()), Point2::new(0.5, 0.5));
    }

    #[test]
    fn rotate_examples() {
        let sq = unit_square().translate(-0.5, -0.5);
        assert!(polys_close(&rotate(&sq, 0.0), &sq, 0.0));

        let diamond = Polygon::from_exterior(ring(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]));
        let r = rotate(&diamond, 90.0);
        assert!(close(r.exterior.vertices()[0], Point2::new(0.0, 1.0), 1e-12));
    }

    #[test]
    fn scale_examples() {
        let sq = unit_square();
        assert!(polys_close(&scale(&sq, 1.0, 1.0).unwrap(), &sq, 0.0));
        let wide = scale(&sq, 2.0, 1.0).unwrap();
        let (lo, hi) = wide.bbox();
        assert_eq!((hi.x - lo.x, hi.y - lo.y), (2.0, 1.0));
        assert_eq!(centroid(&wide), centroid(&sq));
        let back = scale(&scale(&sq, 0.1, 1.0).unwrap(), 10.0, 1.0).unwrap();
        assert!(polys_close(&back, &sq, 1e-9));
        assert!(matches!(scale(&sq, 0.0, 1.0), Err(GeometryError::NonPositiveFactor(..))));
        assert!(matches!(scale(&sq, 1.0, -2.0), Err(GeometryError::NonPositiveFactor(..))));
    }

    #[test]
    fn shear_examples() {
        let sq = unit_square();
        assert!(polys_close(&shear(&sq, 0.0, 0.0).unwrap(), &sq, 0.0));
        // (0, 1) relative to the centroid of the diamond below.
        let diamond = Polygon::from_exterior(ring(&[(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)]));
        let s = shear(&diamond, 45.0, 0.0).unwrap();
        assert!(close(s.exterior.vertices()[0], Point2::new(1.0, 1.0), 1e-12));
        assert!(matches!(shear(&sq, 90.0, 0.0), Err(GeometryError::DegenerateShear(..))));
        assert!(matches!(shear(&sq, 0.0, -91.0), Err(GeometryError::DegenerateShear(..))));
    }

    #[test]
    fn normalize_examples() {
        let sq = Polygon::from_exterior(ring(&[(0.0, 0.0), (50.0, 0.0), (50.0, 50.0), (0.0, 50.0)]));
        let n = normalize(&sq).unwrap();
        assert_eq!(n.bbox(), (Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)));
        let rect = Polygon::from_exterior(ring(&[(0.0, 0.0), (50.0, 0.0), (50.0, 25.0), (0.0, 25.0)]));
        let n = normalize(&rect).unwrap();
        assert_eq!(n.bbox(), (Point2::new(-1.0, -0.5), Point2::new(1.0, 0.5)));
        assert!(polys_close(&normalize(&n).unwrap(), &n, 1e-12));
    }

    #[test]
    fn tag_codes() {
        let codes: Vec<_> = TransformTag::ALL.iter().map(|t| t.code()).collect();
        assert_eq!(codes, ["O", "R", "SC", "SH"]);
        assert_eq!(serde_json::to_string(&TransformTag::Sheared).unwrap(), "\"SH\"");
    }

    fn arb_polygon() -> impl Strategy<Value = Polygon> {
        (3usize..12, 0.5f64..60.0, -100.0f64..100.0, -100.0f64..100.0, any::<bool>()).prop_map(
            |(n, r, cx, cy, hole)| {
                let ring_at = |radius: f64, cw: bool| {
                    let pts: Vec<_> = (0..n)
                        .map(|i| {
                            let mut t = std::f64::consts::TAU * i as f64 / n as f64;
                            if cw {
                                t = -t;
                            }
                            let rr = radius * (1.0 + 0.3 * (3.0 * t).sin());
                            Point2::new(cx + rr * t.cos(), cy + rr * t.sin())
                        })
                        .collect();
                    LinearRing::new(pts).unwrap()
                };
                let holes = if hole { vec![ring_at(r * 0.3, true)] } else { vec![] };
                Polygon::new(ring_at(r, false), holes)
            },
        )
    }

    proptest! {
        #[test]
        fn affine_maps_keep_structure(p in arb_polygon(), a in -180.0f64..180.0, f in 0.1f64..2.0, s in -60.0f64..60.0) {
            for q in [rotate(&p, a), scale(&p, f, 2.1 - f).unwrap(), shear(&p, s, -s / 2.0).unwrap(), normalize(&p).unwrap()] {
                prop_assert_eq!(q.ring_count(), p.ring_count());
                prop_assert_eq!(q.vertex_count(), p.vertex_count());
            }
        }

        #[test]
        fn rotate_and_scale_invert(p in arb_polygon(), a in -180.0f64..180.0, f in 0.1f64..2.0) {
            prop_assert!(polys_close(&rotate(&rotate(&p, a), -a), &p, 1e-9));
            let back = scale(&scale(&p, f, 1.0 / f).unwrap(), 1.0 / f, f).unwrap();
            prop_assert!(polys_close(&back, &p, 1e-9));
        }

        #[test]
        fn normalize_fills_unit_box(p in arb_polygon()) {
            let n = normalize(&p).unwrap();
            let max = n.points().map(|q| q.x.abs().max(q.y.abs())).fold(0.0, f64::max);
            prop_assert!(n.points().all(|q| q.x.abs() <= 1.0 && q.y.abs() <= 1.0));
            prop_assert!((max - 1.0).abs() <= 1e-12);
        }
    }
}
