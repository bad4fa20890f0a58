use polymp_core::geometry::{simplify_ring, LinearRing, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn perp(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return (p.x - a.x).hypot(p.y - a.y);
    }
    ((p.x - a.x) * dy - (p.y - a.y) * dx).abs() / len
}

fn rec(path: &[(usize, Point2)], tol: f64, out: &mut Vec<usize>) {
    if path.len() < 3 {
        return;
    }
    let (a, b) = (path[0].1, path[path.len() - 1].1);
    let (mut at, mut best) = (0, 0.0);
    for (k, (_, p)) in path.iter().enumerate().take(path.len() - 1).skip(1) {
        let d = perp(*p, a, b);
        if d > best {
            at = k;
            best = d;
        }
    }
    if best > tol {
        out.push(path[at].0);
        rec(&path[..=at], tol, out);
        rec(&path[at..], tol, out);
    }
}

fn oracle(ring: &[Point2], tol: f64) -> Vec<Point2> {
    let far = (1..ring.len())
        .fold((0, 0.0), |(bi, bd), i| {
            let d = (ring[i].x - ring[0].x).hypot(ring[i].y - ring[0].y);
            if d > bd { (i, d) } else { (bi, bd) }
        })
        .0;
    let closed: Vec<(usize, Point2)> = ring.iter().copied().enumerate().chain([(0, ring[0])]).collect();
    let mut kept = vec![0, far];
    rec(&closed[..=far], tol, &mut kept);
    rec(&closed[far..], tol, &mut kept);
    kept.sort_unstable();
    kept.dedup();
    kept.into_iter().map(|i| ring[i]).collect()
}

fn random_ring(rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let n = rng.gen_range(3..40);
    let scale = rng.gen_range(2.0..30.0);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|t| {
            let r = scale * rng.gen_range(0.3..1.0);
            Point2::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

#[test]
fn matches_recursive_oracle_on_random_rings() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut tested = 0;
    while tested < 1000 {
        let pts = random_ring(&mut rng);
        let Ok(ring) = LinearRing::new(pts.clone()) else { continue };
        for tol in [0.1, 1.0, 5.0] {
            assert_eq!(simplify_ring(&ring, tol), oracle(&pts, tol), "tol {tol} ring {pts:?}");
        }
        tested += 1;
    }
}
