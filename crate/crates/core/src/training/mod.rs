//! Mini-batch training with Adam, plateau decay and early stopping, plus
//! evaluation reports.

mod adam;
mod metrics;
mod schedule;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use metrics::EvalReport;
pub use schedule::{early_stop, lr_on_plateau, PlateauScheduler};

use crate::geometry::TransformTag;
use crate::graph::PolyGraph;
use crate::models::{Model, ModelConfig, ModelError, ModelParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("no gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("incompatible backbone: {0}")]
    IncompatibleBackbone(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Optimizer and schedule settings. Missing JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub min_delta: f64,
    /// Share of each class held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            batch_size: 64,
            max_epochs: 100,
            plateau_patience: 25,
            plateau_factor: 10.0,
            early_stop_patience: 50,
            min_delta: 1e-4,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 || self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("batch size and patiences must be positive");
        }
        if !(self.plateau_factor > 1.0) {
            return bad("plateau_factor must exceed 1");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Absent when no validation split was given.
    pub val_loss: Option<f64>,
    pub lr: f64,
    /// Wall-clock seconds, present only when timing was requested.
    pub seconds: Option<f64>,
}

pub const LOG_CSV_HEADER: &str = "epoch,train_loss,val_loss,lr,seconds";

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from(LOG_CSV_HEADER);
    out.push('\n');
    for e in log {
        let secs = e.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
        let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{val},{},{secs}\n", e.epoch, e.train_loss, e.lr));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest monitored loss.
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
}

/// Knobs that do not affect the numerical result.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    pub record_time: bool,
}

/// Splits indices per class, holding out `round(fraction * n_c)` of each
/// class (at least one when the class has two or more members and the
/// fraction is positive).
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let mut k = (fraction * idx.len() as f64).round() as usize;
        if fraction > 0.0 && k == 0 && idx.len() >= 2 {
            k = 1;
        }
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn mean_loss(model: &Model, graphs: &[&PolyGraph], batch_size: usize) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for chunk in graphs.chunks(batch_size) {
        total += model.loss(chunk)? * chunk.len() as f64;
    }
    Ok(total / graphs.len() as f64)
}

fn check_labels(graphs: &[&PolyGraph], n_classes: usize) -> Result<(), TrainError> {
    match graphs.iter().find(|g| g.label() >= n_classes) {
        Some(g) => Err(TrainError::LabelOutOfRange {
            label: g.label(),
            n_classes,
        }),
        None => Ok(()),
    }
}

/// Trains `model` on `train`, monitoring `val` (or the training loss when
/// `val` is empty). Returns the best-monitored parameters.
pub fn train(
    mut model: Model,
    train: &[&PolyGraph],
    val: &[&PolyGraph],
    cfg: &TrainConfig,
    opts: TrainOptions,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n_classes = model.config().n_classes;
    check_labels(train, n_classes)?;
    check_labels(val, n_classes)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut sched = PlateauScheduler::new(cfg.lr, cfg.plateau_patience, cfg.plateau_factor, cfg.min_delta);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let lr = sched.lr;
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PolyGraph> = chunk.iter().map(|&i| train[i]).collect();
            let (loss, grads) = model.loss_and_grads(&batch)?;
            train_loss += loss * batch.len() as f64;
            adam_step(model.params_mut(), &grads, &mut adam, lr)?;
        }
        train_loss /= train.len() as f64;
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(mean_loss(&model, val, cfg.batch_size)?)
        };
        let monitored = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _, _)| monitored < *b) {
            best = Some((monitored, epoch, model.params().clone()));
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
            seconds: opts.record_time.then(|| started.elapsed().as_secs_f64()),
        });
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:?} lr {lr}");
        history.push(monitored);
        sched.step(monitored);
        if early_stop(&history, cfg.early_stop_patience, cfg.min_delta) {
            log::info!("early stop after epoch {epoch}");
            break;
        }
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    if let Some((_, _, params)) = best {
        *model.params_mut() = params;
    }
    Ok(TrainOutcome { model, log, best_epoch })
}

/// Copies the feature layers of `pretrained` into a fresh model with
/// `n_classes` outputs (the classifier head is re-initialized from
/// `cfg.seed`), then trains every layer.
pub fn fine_tune(
    pretrained: &Model,
    n_classes: usize,
    train_set: &[&PolyGraph],
    val: &[&PolyGraph],
    cfg: &TrainConfig,
    opts: TrainOptions,
) -> Result<TrainOutcome, TrainError> {
    let model = transfer_backbone(pretrained, n_classes, cfg.seed)?;
    train(model, train_set, val, cfg, opts)
}

/// The fine-tuning starting point: pretrained feature layers, new head.
pub fn transfer_backbone(pretrained: &Model, n_classes: usize, seed: u64) -> Result<Model, TrainError> {
    let cfg = ModelConfig {
        n_classes,
        ..pretrained.config().clone()
    };
    let mut fresh = Model::init(cfg, seed)?;
    let names: Vec<String> = fresh.params().names().map(str::to_string).collect();
    for name in names.iter().filter(|n| !n.starts_with("head.")) {
        let src = pretrained
            .params()
            .get(name)
            .ok_or_else(|| TrainError::IncompatibleBackbone(format!("missing `{name}`")))?;
        let dst = fresh.params_mut().get_mut(name).expect("own layout");
        if src.shape() != dst.shape() {
            return Err(TrainError::IncompatibleBackbone(format!(
                "`{name}` is {:?}, expected {:?}",
                src.shape(),
                dst.shape()
            )));
        }
        *dst = src.clone();
    }
    Ok(fresh)
}

/// Predicts every sample and tallies accuracy per transform tag.
pub fn evaluate<'a>(
    model: &Model,
    samples: impl IntoIterator<Item = (&'a PolyGraph, TransformTag)>,
) -> Result<EvalReport, TrainError> {
    let samples: Vec<(&PolyGraph, TransformTag)> = samples.into_iter().collect();
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n_classes = model.config().n_classes;
    let mut triples = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(256) {
        let graphs: Vec<&PolyGraph> = chunk.iter().map(|(g, _)| *g).collect();
        check_labels(&graphs, n_classes)?;
        let preds = model.predict(&graphs)?;
        triples.extend(chunk.iter().zip(preds).map(|((g, tag), p)| (g.label(), p, *tag)));
    }
    Ok(EvalReport::from_predictions(n_classes, triples))
}
