use std::path::{Path, PathBuf};

use clap::Args;
use polymp_core::dataset::{build_simplified_view, load_dataset, Dataset, DEFAULT_SIMPLIFY_TOLERANCE, TEST_SPLIT};
use polymp_core::models::{CheckpointMeta, Model};
use polymp_core::training::{evaluate, EvalReport};

use super::train::{model_label, tagged, EvalFile};
use crate::{read_file, write_file, CliError, Result};

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = TEST_SPLIT)]
    pub split: String,
    /// Evaluate the Douglas-Peucker simplified view.
    #[arg(long)]
    pub simplified: bool,
    #[arg(long, default_value_t = DEFAULT_SIMPLIFY_TOLERANCE)]
    pub tolerance: f64,
    /// CSV destination; defaults to `eval_<split>[_simplified].csv` beside
    /// the checkpoint. A JSON report is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta)> {
    Model::from_checkpoint_json(&read_file(path)?)
        .map_err(|e| CliError::IncompatibleCheckpoint(format!("{}: {e}", path.display())))
}

/// Fails unless `model` was trained on the classes of `ds`.
pub fn check_compatible(model: &Model, meta: &CheckpointMeta, ds: &Dataset) -> Result<()> {
    let n = model.config().n_classes;
    if n != ds.n_classes() {
        return Err(CliError::IncompatibleCheckpoint(format!(
            "checkpoint has {n} classes, dataset has {}",
            ds.n_classes()
        )));
    }
    if !meta.class_names.is_empty() && meta.class_names != ds.class_names {
        return Err(CliError::IncompatibleCheckpoint(format!(
            "checkpoint classes {:?} differ from dataset classes {:?}",
            meta.class_names, ds.class_names
        )));
    }
    Ok(())
}

/// Evaluates on `ds`, or on its simplified view when `tolerance` is given.
pub fn evaluate_view(model: &Model, ds: &Dataset, tolerance: Option<f64>) -> Result<EvalReport> {
    Ok(match tolerance {
        Some(tol) => {
            let (view, _) = build_simplified_view(ds, tol)?;
            evaluate(model, tagged(&view))?
        }
        None => evaluate(model, tagged(ds))?,
    })
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let (model, meta) = load_checkpoint(&args.ckpt)?;
    let ds = load_dataset(&args.data, &args.split)?;
    check_compatible(&model, &meta, &ds)?;
    let report = evaluate_view(&model, &ds, args.simplified.then_some(args.tolerance))?;
    let label = model_label(model.config());
    let row = report.csv_row(&label, meta.ratio);
    println!("{}", EvalReport::CSV_HEADER);
    println!("{row}");

    let suffix = if args.simplified { "_simplified" } else { "" };
    let stem = format!("eval_{}{suffix}", args.split);
    let out = args.out.clone().unwrap_or_else(|| {
        args.ckpt
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("{stem}.csv"))
    });
    write_file(&out, &format!("{}\n{row}\n", EvalReport::CSV_HEADER))?;
    let json = EvalFile {
        model: &label,
        ratio: meta.ratio,
        split: &args.split,
        simplified: args.simplified,
        report: &report,
    };
    write_file(&out.with_extension("json"), &json.to_json())
}
