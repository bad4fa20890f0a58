use clap::Args;
use polymp_core::dataset::{sample_instance, ShapeClass, ShapeJitter};
use polymp_core::geometry::normalize;
use polymp_core::gradcheck::{generic_point, gradcheck_with, GradCheckReport, DEFAULT_EPS, DEFAULT_TOLERANCE};
use polymp_core::graph::encode_graph;
use polymp_core::models::{sequence_length_for, Arch, Model, ModelConfig};
use polymp_core::PolyGraph;

use crate::{CliError, Result};

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "polymp")]
    pub arch: Arch,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// Perturb the backprop gradients before comparing (self-test).
    #[arg(long, hide = true)]
    pub corrupt_backward: bool,
}

/// Two small graphs: a holed "O" and an "E".
pub fn check_batch(seed: u64) -> Vec<PolyGraph> {
    [(ShapeClass::O, 5usize), (ShapeClass::E, 0usize)]
        .into_iter()
        .map(|(cls, label)| {
            let poly = sample_instance(cls, &ShapeJitter::default(), seed);
            encode_graph(&normalize(&poly).expect("glyphs have extent"), label)
        })
        .collect()
}

pub fn check_arch(arch: Arch, seed: u64, eps: f64, corrupt: bool) -> Result<GradCheckReport> {
    let batch = check_batch(seed);
    let refs: Vec<&PolyGraph> = batch.iter().collect();
    let counts: Vec<usize> = batch.iter().map(PolyGraph::n).collect();
    let cfg = ModelConfig::new(arch, 10).with_max_seq_len(sequence_length_for(&counts));
    let model = generic_point(&Model::init(cfg, seed)?, seed);
    Ok(gradcheck_with(&model, &refs, eps, |grads| {
        if corrupt {
            for g in grads.iter_mut() {
                for v in g.data_mut() {
                    *v = 1.1 * *v + 1e-3;
                }
            }
        }
    })?)
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let report = check_arch(args.arch, args.seed, args.eps, args.corrupt_backward)?;
    println!("param\tentries\tmax_rel_err\tskipped");
    for p in &report.params {
        println!("{}\t{}\t{:.3e}\t{}", p.name, p.entries, p.max_rel_err, p.skipped);
    }
    println!("max\t{:.3e}", report.max_rel_err());
    report
        .check(args.tol)
        .map_err(|e| CliError::GradCheckFailed(format!("{}: {e}", args.arch)))
}
