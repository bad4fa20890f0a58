use polymp_core::dataset::{densify, sample_instance, ShapeClass, ShapeJitter};
use polymp_core::geometry::{normalize, simplify_dp, Polygon};
use polymp_core::gradcheck::generic_point;
use polymp_core::graph::{encode_graph, permute_graph};
use polymp_core::models::{Arch, Model, ModelConfig};
use polymp_core::PolyGraph;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn glyph(class: usize, seed: u64, k: usize) -> Polygon {
    let cls = ShapeClass::ALL[class % ShapeClass::ALL.len()];
    let poly = sample_instance(cls, &ShapeJitter::default(), seed);
    densify(&poly, k, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn model(arch: Arch, seed: u64) -> Model {
    generic_point(&Model::init(ModelConfig::new(arch, 10), seed).unwrap(), seed)
}

fn max_diff(m: &Model, a: &PolyGraph, b: &PolyGraph) -> f64 {
    m.logits(&[a]).unwrap().max_abs_diff(&m.logits(&[b]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariant_models_ignore_node_order(class in 0usize..10, seed in any::<u64>(), k in 0usize..4) {
        let g = encode_graph(&normalize(&glyph(class, seed, k)).unwrap(), 0);
        let mut perm: Vec<usize> = (0..g.n()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        let pg = permute_graph(&g, &perm).unwrap();
        for arch in [Arch::PolyMp, Arch::DeepSet, Arch::Gcn] {
            prop_assert!(max_diff(&model(arch, seed % 97), &g, &pg) < 1e-9, "{arch}");
        }
    }

    #[test]
    fn dp_keeps_a_subset_and_is_idempotent(class in 0usize..10, seed in any::<u64>(), k in 0usize..4, tol in 0.0f64..6.0) {
        let p = glyph(class, seed, k);
        let Ok(s) = simplify_dp(&p, tol) else { return Ok(()) };
        let before: Vec<_> = p.points().collect();
        prop_assert!(s.points().all(|q| before.contains(&q)));
        prop_assert_eq!(simplify_dp(&s, tol).unwrap(), s);
    }

    #[test]
    fn simplifying_densified_glyph_restores_it(class in 0usize..10, seed in any::<u64>(), k in 1usize..5) {
        let base = sample_instance(ShapeClass::ALL[class], &ShapeJitter::default(), seed);
        let dense = densify(&base, k, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(dense.vertex_count(), base.vertex_count() * (k + 1));
        prop_assert_eq!(simplify_dp(&dense, 1.0).unwrap().vertex_count(), base.vertex_count());
    }

    #[test]
    fn deepset_ignores_edges(class in 0usize..10, seed in any::<u64>()) {
        let g = encode_graph(&normalize(&glyph(class, seed, 2)).unwrap(), 0);
        let n = g.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let edges = (0..n).flat_map(|i| {
            let (a, b) = (order[i], order[(i + 1) % n]);
            [(a, b), (b, a)]
        }).collect();
        let rewired = g.rewired(edges).unwrap();
        let m = model(Arch::DeepSet, 3);
        let (x, y) = (m.logits(&[&g]).unwrap(), m.logits(&[&rewired]).unwrap());
        prop_assert!(x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn connectivity_matters_for_graph_models() {
    let g = encode_graph(&normalize(&glyph(5, 4, 1)).unwrap(), 0);
    let hole = (0..g.n()).find(|&i| g.nodes()[i][2] == 1.0).unwrap();
    let mut edges = g.edges().to_vec();
    edges.extend([(0, hole), (hole, 0)]);
    let bridged = PolyGraph::with_structure(g.nodes().to_vec(), edges, 0).unwrap();
    for arch in [Arch::PolyMp, Arch::Gcn] {
        assert!(max_diff(&model(arch, 1), &g, &bridged) > 1e-9, "{arch}");
    }
}

#[test]
fn checkpoint_round_trip_preserves_logits() {
    let g = encode_graph(&normalize(&glyph(0, 9, 3)).unwrap(), 0);
    for arch in Arch::ALL {
        let m = model(arch, 2);
        let (back, _) = Model::from_checkpoint_json(&m.to_checkpoint_json(None)).unwrap();
        assert_eq!(m.logits(&[&g]).unwrap(), back.logits(&[&g]).unwrap(), "{arch}");
    }
}
