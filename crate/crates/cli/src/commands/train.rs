use std::path::{Path, PathBuf};

use clap::Args;
use polymp_core::dataset::{load_dataset, split_name, Dataset, TEST_SPLIT};
use polymp_core::models::{sequence_length_for, Arch, CheckpointMeta, Model, ModelConfig};
use polymp_core::training::{evaluate, log_csv, stratified_split, train, EvalReport, TrainConfig, TrainOptions};
use polymp_core::PolyGraph;
use serde::Serialize;

use crate::{read_file, write_file, CliError, Result};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// polymp, deepset, gcn or veercnn.
    #[arg(long)]
    pub arch: Arch,
    /// Transform ratio of the training split (0, 0.2, 0.4, 0.6 or 0.8).
    #[arg(long, default_value_t = 0.0)]
    pub ratio: f64,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Flat JSON training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Feed PolyMP relative positions only in its first layer.
    #[arg(long)]
    pub relative_only: bool,
    /// Fill the `seconds` column of log.csv (makes the log run-dependent).
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

impl TrainOverrides {
    pub fn resolve(&self, file: Option<&Path>) -> Result<TrainConfig> {
        let mut cfg = match file {
            Some(path) => serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.val_fraction {
            cfg.val_fraction = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub arch: Arch,
    pub ratio: f64,
    pub data: PathBuf,
    pub train: TrainConfig,
    pub out: PathBuf,
    pub relative_only: bool,
    pub record_time: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub model: Model,
    pub report: EvalReport,
    pub checkpoint: PathBuf,
    pub label: String,
}

/// Name used in CSV rows and file names.
pub fn model_label(cfg: &ModelConfig) -> String {
    if cfg.arch == Arch::PolyMp && cfg.relative_only {
        "polymp_rel".to_string()
    } else {
        cfg.arch.name().to_string()
    }
}

pub fn checkpoint_name(label: &str, ratio: f64) -> String {
    format!("{label}_r{:02}.ckpt.json", (ratio * 100.0).round() as u32)
}

#[derive(Serialize)]
pub(crate) struct EvalFile<'a> {
    pub model: &'a str,
    pub ratio: Option<f64>,
    pub split: &'a str,
    pub simplified: bool,
    #[serde(flatten)]
    pub report: &'a EvalReport,
}

impl EvalFile<'_> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn model_config_for(arch: Arch, train: &Dataset, relative_only: bool) -> ModelConfig {
    let counts: Vec<usize> = train.samples.iter().map(|s| s.graph.n()).collect();
    ModelConfig::new(arch, train.n_classes())
        .with_relative_only(relative_only)
        .with_max_seq_len(sequence_length_for(&counts))
}

pub fn tagged(ds: &Dataset) -> impl Iterator<Item = (&PolyGraph, polymp_core::TransformTag)> {
    ds.samples.iter().map(|s| (&s.graph, s.tag()))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let split = split_name(spec.ratio)?;
    let train_ds = load_dataset(&spec.data, &split)?;
    let test_ds = load_dataset(&spec.data, TEST_SPLIT)?;
    let labels: Vec<usize> = train_ds.samples.iter().map(|s| s.label).collect();
    let (tr_idx, va_idx) = stratified_split(&labels, spec.train.val_fraction, spec.train.seed);
    let tr: Vec<&PolyGraph> = tr_idx.iter().map(|&i| &train_ds.samples[i].graph).collect();
    let va: Vec<&PolyGraph> = va_idx.iter().map(|&i| &train_ds.samples[i].graph).collect();

    let cfg = model_config_for(spec.arch, &train_ds, spec.relative_only);
    let label = model_label(&cfg);
    let model = Model::init(cfg, spec.train.seed)?;
    log::info!("training {label} on {split}: {} train / {} val", tr.len(), va.len());
    let opts = TrainOptions {
        record_time: spec.record_time,
    };
    let outcome = train(model, &tr, &va, &spec.train, opts)?;
    let report = evaluate(&outcome.model, tagged(&test_ds))?;

    let meta = CheckpointMeta {
        ratio: Some(spec.ratio),
        seed: spec.train.seed,
        class_names: train_ds.class_names.clone(),
    };
    let checkpoint = spec.out.join(checkpoint_name(&label, spec.ratio));
    write_file(&checkpoint, &outcome.model.to_checkpoint_json(Some(&meta)))?;
    write_file(&spec.out.join("log.csv"), &log_csv(&outcome.log))?;
    let eval = EvalFile {
        model: &label,
        ratio: Some(spec.ratio),
        split: TEST_SPLIT,
        simplified: false,
        report: &report,
    };
    write_file(&spec.out.join("eval.json"), &eval.to_json())?;
    Ok(ExperimentResult {
        model: outcome.model,
        report,
        checkpoint,
        label,
    })
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let spec = ExperimentSpec {
        arch: args.arch,
        ratio: args.ratio,
        data: args.data.clone(),
        train: args.overrides.resolve(args.config.as_deref())?,
        out: args.out.clone(),
        relative_only: args.relative_only,
        record_time: args.record_time,
    };
    let res = run_experiment(&spec)?;
    println!("{}", EvalReport::CSV_HEADER);
    println!("{}", res.report.csv_row(&res.label, Some(spec.ratio)));
    Ok(())
}
