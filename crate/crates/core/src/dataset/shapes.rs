//! Letter-like polygon templates and trivial-vertex densification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{LinearRing, Point2, Polygon};

/// The built-in classes, in label order.
pub const CLASS_NAMES: [&str; 10] = ["E", "F", "H", "I", "L", "O", "T", "U", "Y", "Z"];

const BASE: f64 = 50.0;
/// Stroke width as a fraction of the glyph height.
const STROKE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    E,
    F,
    H,
    I,
    L,
    O,
    T,
    U,
    Y,
    Z,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 10] = [
        ShapeClass::E,
        ShapeClass::F,
        ShapeClass::H,
        ShapeClass::I,
        ShapeClass::L,
        ShapeClass::O,
        ShapeClass::T,
        ShapeClass::U,
        ShapeClass::Y,
        ShapeClass::Z,
    ];

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self as usize]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(name))
    }

    pub fn has_hole(self) -> bool {
        self == ShapeClass::O
    }
}

/// Randomness applied to a template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeJitter {
    /// Relative spread of width, height, stroke and bar positions.
    pub proportion: f64,
    /// Per-axis corner displacement as a fraction of the shorter adjacent
    /// edge.
    pub corner: f64,
    /// Chance of one serif-like notch on the outline.
    pub serif_prob: f64,
}

impl Default for ShapeJitter {
    fn default() -> Self {
        Self {
            proportion: 0.15,
            corner: 0.1,
            serif_prob: 0.3,
        }
    }
}

impl ShapeJitter {
    pub const NONE: ShapeJitter = ShapeJitter {
        proportion: 0.0,
        corner: 0.0,
        serif_prob: 0.0,
    };
}

struct Dims {
    w: f64,
    h: f64,
    t: f64,
    /// Middle-bar height as a fraction of `h`.
    mid: f64,
}

fn spread(rng: &mut impl Rng, amount: f64) -> f64 {
    if amount > 0.0 {
        rng.gen_range(-amount..=amount)
    } else {
        0.0
    }
}

fn template(cls: ShapeClass, d: &Dims) -> (Vec<(f64, f64)>, Option<Vec<(f64, f64)>>) {
    let Dims { w, h, t, mid } = *d;
    let m = h * mid;
    let c = w / 2.0;
    let ext = match cls {
        ShapeClass::I => vec![(0.0, 0.0), (1.2 * t, 0.0), (1.2 * t, h), (0.0, h)],
        ShapeClass::L => vec![(0.0, 0.0), (w, 0.0), (w, t), (t, t), (t, h), (0.0, h)],
        ShapeClass::T => vec![
            (c - t / 2.0, 0.0),
            (c + t / 2.0, 0.0),
            (c + t / 2.0, h - t),
            (w, h - t),
            (w, h),
            (0.0, h),
            (0.0, h - t),
            (c - t / 2.0, h - t),
        ],
        ShapeClass::E => vec![
            (0.0, 0.0),
            (w, 0.0),
            (w, t),
            (t, t),
            (t, m - t / 2.0),
            (0.85 * w, m - t / 2.0),
            (0.85 * w, m + t / 2.0),
            (t, m + t / 2.0),
            (t, h - t),
            (w, h - t),
            (w, h),
            (0.0, h),
        ],
        ShapeClass::F => vec![
            (0.0, 0.0),
            (t, 0.0),
            (t, m - t / 2.0),
            (0.85 * w, m - t / 2.0),
            (0.85 * w, m + t / 2.0),
            (t, m + t / 2.0),
            (t, h - t),
            (w, h - t),
            (w, h),
            (0.0, h),
        ],
        ShapeClass::H => vec![
            (0.0, 0.0),
            (t, 0.0),
            (t, m - t / 2.0),
            (w - t, m - t / 2.0),
            (w - t, 0.0),
            (w, 0.0),
            (w, h),
            (w - t, h),
            (w - t, m + t / 2.0),
            (t, m + t / 2.0),
            (t, h),
            (0.0, h),
        ],
        ShapeClass::U => vec![(0.0, 0.0), (w, 0.0), (w, h), (w - t, h), (w - t, t), (t, t), (t, h), (0.0, h)],
        ShapeClass::O => vec![(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)],
        ShapeClass::Y => {
            let stem = 0.9 * m;
            vec![
                (c - t / 2.0, 0.0),
                (c + t / 2.0, 0.0),
                (c + t / 2.0, stem),
                (w, h),
                (w - 1.4 * t, h),
                (c, stem + 1.2 * t),
                (1.4 * t, h),
                (0.0, h),
                (c - t / 2.0, stem),
            ]
        }
        ShapeClass::Z => {
            let d = 1.6 * t;
            vec![
                (0.0, 0.0),
                (w, 0.0),
                (w, t),
                (d, t),
                (w, h - t),
                (w, h),
                (0.0, h),
                (0.0, h - t),
                (w - d, h - t),
                (0.0, t),
            ]
        }
    };
    let hole = (cls == ShapeClass::O).then(|| vec![(t, t), (t, h - t), (w - t, h - t), (w - t, t)]);
    (ext, hole)
}

/// Inserts a small outward rectangular notch in the middle of a random edge
/// lying on the template's bounding box.
fn add_serif(ring: &mut Vec<(f64, f64)>, size: f64, rng: &mut impl Rng) {
    let n = ring.len();
    let (x0, x1) = ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let on_box = |a: (f64, f64), b: (f64, f64)| {
        let horiz = a.1 == b.1 && (a.1 == y0 || a.1 == y1);
        let vert = a.0 == b.0 && (a.0 == x0 || a.0 == x1);
        (horiz || vert) && ((b.0 - a.0).abs() + (b.1 - a.1).abs()) > 3.0 * size
    };
    let candidates: Vec<usize> = (0..n).filter(|&i| on_box(ring[i], ring[(i + 1) % n])).collect();
    if candidates.is_empty() {
        return;
    }
    let i = candidates[rng.gen_range(0..candidates.len())];
    let (a, b) = (ring[i], ring[(i + 1) % n]);
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let (ux, uy) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
    // Counter-clockwise rings have their outside on the right.
    let (nx, ny) = (uy, -ux);
    let (mx, my) = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let p = (mx - ux * size / 2.0, my - uy * size / 2.0);
    let q = (mx + ux * size / 2.0, my + uy * size / 2.0);
    let notch = [p, (p.0 + nx * size, p.1 + ny * size), (q.0 + nx * size, q.1 + ny * size), q];
    ring.splice(i + 1..i + 1, notch);
}

fn jitter_corners(ring: &[(f64, f64)], amount: f64, rng: &mut impl Rng) -> Vec<Point2> {
    let n = ring.len();
    let dist = |a: (f64, f64), b: (f64, f64)| ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    (0..n)
        .map(|i| {
            let (prev, cur, next) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            let r = amount * dist(prev, cur).min(dist(cur, next));
            Point2::new(cur.0 + spread(rng, r), cur.1 + spread(rng, r))
        })
        .collect()
}

/// One random instance of `cls`, roughly 50 x 50 units with the lower-left
/// of the template at the origin. Exterior rings are counter-clockwise,
/// holes clockwise.
pub fn generate_class_instance(cls: ShapeClass, jitter: &ShapeJitter, rng: &mut impl Rng) -> Polygon {
    let p = jitter.proportion;
    let w = BASE * (1.0 + spread(rng, p));
    let h = BASE * (1.0 + spread(rng, p));
    let dims = Dims {
        w,
        h,
        t: STROKE * h * (1.0 + spread(rng, p)),
        mid: 0.5 + spread(rng, p / 3.0),
    };
    let (mut ext, hole) = template(cls, &dims);
    if jitter.serif_prob > 0.0 && rng.gen_bool(jitter.serif_prob.min(1.0)) {
        add_serif(&mut ext, 0.25 * dims.t, rng);
    }
    let ring = |pts: Vec<Point2>| LinearRing::new(pts).expect("template rings are valid");
    let exterior = ring(jitter_corners(&ext, jitter.corner, rng));
    let holes = hole
        .map(|h| ring(jitter_corners(&h, jitter.corner, rng)))
        .into_iter()
        .collect();
    Polygon::new(exterior, holes)
}

/// Maximum distance of an inserted vertex from its evenly spaced slot.
pub const DENSIFY_JITTER: f64 = 0.1;

/// Inserts `points_per_edge` extra vertices along every edge of every ring.
/// They stay on the edge, offset from even spacing by at most
/// [`DENSIFY_JITTER`] units along it, so the outline is unchanged.
pub fn densify(poly: &Polygon, points_per_edge: usize, rng: &mut impl Rng) -> Polygon {
    if points_per_edge == 0 {
        return poly.clone();
    }
    let k = points_per_edge as f64;
    let mut densify_ring = |ring: &LinearRing| {
        let v = ring.vertices();
        let mut out = Vec::with_capacity(v.len() * (points_per_edge + 1));
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            out.push(a);
            let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
            // Keep inserted points strictly ordered along the edge.
            let room = (0.45 * len / (k + 1.0)).min(DENSIFY_JITTER);
            for j in 1..=points_per_edge {
                let s = j as f64 / (k + 1.0) + spread(rng, room) / len;
                out.push(Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)));
            }
        }
        LinearRing::new(out).expect("densified ring keeps distinct vertices")
    };
    let exterior = densify_ring(&poly.exterior);
    let holes = poly.holes.iter().map(&mut densify_ring).collect();
    Polygon::new(exterior, holes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::simplify_dp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
        let orient = |p: Point2, q: Point2, r: Point2| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        let (d1, d2) = (orient(a, b, c), orient(a, b, d));
        let (d3, d4) = (orient(c, d, a), orient(c, d, b));
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }

    fn is_simple(poly: &Polygon) -> bool {
        let mut segs = Vec::new();
        for ring in poly.rings() {
            let v = ring.vertices();
            for i in 0..v.len() {
                segs.push((v[i], v[(i + 1) % v.len()]));
            }
        }
        for i in 0..segs.len() {
            for j in i + 1..segs.len() {
                if segments_cross(segs[i].0, segs[i].1, segs[j].0, segs[j].1) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn zero_jitter_templates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let i = generate_class_instance(ShapeClass::I, &ShapeJitter::NONE, &mut rng);
        let v = i.exterior.vertices();
        assert_eq!(v.len(), 4);
        for k in 0..4 {
            let (a, b) = (v[k], v[(k + 1) % 4]);
            assert!(a.x == b.x || a.y == b.y);
        }

        let o = generate_class_instance(ShapeClass::O, &ShapeJitter::NONE, &mut rng);
        assert_eq!(o.ring_count(), 2);
        let (lo, hi) = o.bbox();
        assert_eq!((hi.x - lo.x, hi.y - lo.y), (50.0, 50.0));
        let hole = Polygon::from_exterior(o.holes[0].clone());
        let (hlo, hhi) = hole.bbox();
        assert_eq!(hlo.x + hhi.x, lo.x + hi.x);
        assert_eq!(hlo.y + hhi.y, lo.y + hi.y);
        assert_eq!(hhi.x - hlo.x, hhi.y - hlo.y);
    }

    #[test]
    fn instances_are_valid_and_oriented() {
        let jitter = ShapeJitter {
            serif_prob: 0.5,
            ..ShapeJitter::default()
        };
        for cls in ShapeClass::ALL {
            for seed in 0..60 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = generate_class_instance(cls, &jitter, &mut rng);
                assert!(p.exterior.signed_area2() > 0.0, "{cls:?}");
                assert!(p.holes.iter().all(|h| h.signed_area2() < 0.0));
                assert_eq!(p.ring_count(), 1 + usize::from(cls.has_hole()));
                assert!(is_simple(&p), "{cls:?} seed {seed}");
                let (lo, hi) = p.bbox();
                assert!((30.0..80.0).contains(&(hi.x - lo.x).max(hi.y - lo.y)));
            }
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let gen = |seed| generate_class_instance(ShapeClass::E, &ShapeJitter::default(), &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(gen(5), gen(5));
        assert_ne!(gen(5), gen(6));
    }

    #[test]
    fn densify_counts_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sq = Polygon::from_exterior(LinearRing::from_coords(&[(0.0, 0.0), (50.0, 0.0), (50.0, 50.0), (0.0, 50.0)]).unwrap());
        assert_eq!(densify(&sq, 0, &mut rng), sq);
        let d = densify(&sq, 2, &mut rng);
        assert_eq!(d.vertex_count(), 12);
        for p in d.exterior.vertices() {
            assert!(p.x == 0.0 || p.x == 50.0 || p.y == 0.0 || p.y == 50.0);
        }
        assert_eq!(simplify_dp(&d, 1.0).unwrap(), sq);
    }

    #[test]
    fn densify_then_simplify_never_grows() {
        for cls in ShapeClass::ALL {
            for seed in 0..40 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = generate_class_instance(cls, &ShapeJitter::default(), &mut rng);
                let d = densify(&p, 3, &mut rng);
                assert_eq!(d.vertex_count(), 4 * p.vertex_count());
                assert!(is_simple(&d));
                let s = simplify_dp(&d, 1.0).unwrap();
                assert!(s.vertex_count() <= p.vertex_count(), "{cls:?} seed {seed}");
            }
        }
    }

    #[test]
    fn class_names_round_trip() {
        for (i, c) in ShapeClass::ALL.into_iter().enumerate() {
            assert_eq!(c as usize, i);
            assert_eq!(ShapeClass::from_name(c.name()), Some(c));
        }
        assert_eq!(ShapeClass::from_name("q"), None);
    }
}
