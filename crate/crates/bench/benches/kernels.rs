use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polymp_core::dataset::{densify, sample_instance, ShapeClass, ShapeJitter};
use polymp_core::geometry::{normalize, parse_wkt, simplify_dp, write_wkt};
use polymp_core::graph::{encode_graph, laplacian_weights};
use polymp_core::tensor::{Reduce, Tape, Tensor};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn glyph(points_per_edge: usize) -> polymp_core::Polygon {
    let p = sample_instance(ShapeClass::E, &ShapeJitter::default(), 7);
    densify(&p, points_per_edge, &mut ChaCha8Rng::seed_from_u64(7))
}

fn bench_geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("simplify_dp");
    for k in [0usize, 3, 15] {
        let poly = glyph(k);
        group.bench_with_input(BenchmarkId::from_parameter(poly.vertex_count()), &poly, |b, p| {
            b.iter(|| simplify_dp(black_box(p), 1.0).unwrap())
        });
    }
    group.finish();

    let poly = glyph(3);
    let text = write_wkt(&poly);
    c.bench_function("wkt_round_trip", |b| b.iter(|| parse_wkt(black_box(&text)).unwrap()));
    c.bench_function("encode_graph", |b| {
        b.iter(|| {
            let g = encode_graph(&normalize(black_box(&poly)).unwrap(), 0);
            laplacian_weights(&g)
        })
    });
}

fn bench_tape(c: &mut Criterion) {
    let rows = 2048;
    let x = Tensor::matrix(rows, 64, (0..rows * 64).map(|i| (i % 17) as f64 * 0.01).collect()).unwrap();
    let w = Tensor::matrix(64, 64, (0..64 * 64).map(|i| (i % 13) as f64 * 0.001).collect()).unwrap();
    let seg: Vec<usize> = (0..rows).map(|i| i / 32).collect();

    c.bench_function("matmul_relu_backward_2048x64", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let wv = tape.param(w.clone());
            let h = tape.matmul(xv, wv).unwrap();
            let h = tape.relu(h).unwrap();
            let pooled = tape.segment_reduce(h, &seg, rows / 32, Reduce::Max).unwrap();
            let loss = tape.sum_all(pooled).unwrap();
            tape.backward(loss).unwrap()
        })
    });
}

criterion_group!(benches, bench_geometry, bench_tape);
criterion_main!(benches);
