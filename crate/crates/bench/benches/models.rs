use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polymp_core::dataset::{generate_base, GenConfig};
use polymp_core::models::{sequence_length_for, Arch, Model, ModelConfig};
use polymp_core::PolyGraph;

fn bench_models(c: &mut Criterion) {
    let cfg = GenConfig {
        per_class: 7,
        ..GenConfig::default()
    };
    let ds = generate_base(&cfg).unwrap();
    let graphs: Vec<&PolyGraph> = ds.graphs().into_iter().take(64).collect();
    let counts: Vec<usize> = graphs.iter().map(|g| g.n()).collect();

    let mut forward = c.benchmark_group("forward_batch64");
    for arch in Arch::ALL {
        let model = Model::init(
            ModelConfig::new(arch, ds.n_classes()).with_max_seq_len(sequence_length_for(&counts)),
            0,
        )
        .unwrap();
        forward.bench_with_input(BenchmarkId::from_parameter(arch), &model, |b, m| {
            b.iter(|| m.logits(black_box(&graphs)).unwrap())
        });
    }
    forward.finish();

    let mut step = c.benchmark_group("loss_and_grads_batch64");
    step.sample_size(20);
    for arch in Arch::ALL {
        let model = Model::init(
            ModelConfig::new(arch, ds.n_classes()).with_max_seq_len(sequence_length_for(&counts)),
            0,
        )
        .unwrap();
        step.bench_with_input(BenchmarkId::from_parameter(arch), &model, |b, m| {
            b.iter(|| m.loss_and_grads(black_box(&graphs)).unwrap())
        });
    }
    step.finish();
}

criterion_group!(benches, bench_models);
criterion_main!(benches);
