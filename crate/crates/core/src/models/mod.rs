//! The four classifiers and their shared plumbing.
//!
//! All models map a batch of [`PolyGraph`]s to class logits through two
//! feature layers, a per-graph readout and a two-layer classifier head.
//! Weights are `in x out` matrices applied as `x W + b`.

pub mod deepset;
pub mod gcn;
mod params;
pub mod polymp;
pub mod veercnn;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use params::{BoundParams, ModelParams};

use crate::graph::{GraphBatch, GraphError, PolyGraph, NODE_FEATURES};
use crate::tensor::{Reduce, Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("checkpoint json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    #[serde(rename = "polymp")]
    PolyMp,
    #[serde(rename = "deepset")]
    DeepSet,
    Gcn,
    #[serde(rename = "veercnn")]
    VeerCnn,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::DeepSet, Arch::Gcn, Arch::PolyMp, Arch::VeerCnn];

    pub fn name(self) -> &'static str {
        match self {
            Arch::PolyMp => "polymp",
            Arch::DeepSet => "deepset",
            Arch::Gcn => "gcn",
            Arch::VeerCnn => "veercnn",
        }
    }

    fn layer_prefix(self) -> &'static str {
        match self {
            Arch::PolyMp => "mp",
            Arch::DeepSet => "phi",
            Arch::Gcn => "gcn",
            Arch::VeerCnn => "conv",
        }
    }

    /// Whether logits depend only on the graph up to node relabelling.
    pub fn is_permutation_invariant(self) -> bool {
        !matches!(self, Arch::VeerCnn)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "polymp" => Ok(Arch::PolyMp),
            "deepset" => Ok(Arch::DeepSet),
            "gcn" | "gcae" => Ok(Arch::Gcn),
            "veercnn" | "cnn" => Ok(Arch::VeerCnn),
            _ => Err(ModelError::InvalidConfig(format!("unknown architecture `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Max,
    Sum,
}

impl From<Pooling> for Reduce {
    fn from(p: Pooling) -> Self {
        match p {
            Pooling::Mean => Reduce::Mean,
            Pooling::Max => Reduce::Max,
            Pooling::Sum => Reduce::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Input width followed by the width of each feature layer.
    pub dims: Vec<usize>,
    /// Hidden width of the classifier head.
    pub head_hidden: usize,
    pub n_classes: usize,
    /// Per-graph readout.
    pub pooling: Pooling,
    /// Neighbour reduction inside a message-passing layer (PolyMP only).
    pub aggregation: Pooling,
    /// Drop raw coordinates from the first message-passing layer so the
    /// network sees relative positions only (PolyMP only).
    pub relative_only: bool,
    /// Padded sequence length (VeerCNN only).
    pub max_seq_len: usize,
}

impl ModelConfig {
    /// Default two-layer configuration of `arch`.
    ///
    /// Head widths are chosen so that the 26-class parameter counts land
    /// near 11.8k (PolyMP, DeepSet), 7.6k (GCN) and 13.9k (VeerCNN).
    pub fn new(arch: Arch, n_classes: usize) -> Self {
        let (dims, head_hidden, pooling) = match arch {
            Arch::PolyMp => (vec![NODE_FEATURES, 64, 64], 32, Pooling::Mean),
            Arch::DeepSet => (vec![NODE_FEATURES, 64, 64], 80, Pooling::Sum),
            Arch::Gcn => (vec![NODE_FEATURES, 64, 64], 32, Pooling::Mean),
            Arch::VeerCnn => (vec![NODE_FEATURES, 32, 64], 80, Pooling::Mean),
        };
        Self {
            arch,
            dims,
            head_hidden,
            n_classes,
            pooling,
            aggregation: Pooling::Max,
            relative_only: false,
            max_seq_len: 64,
        }
    }

    pub fn with_relative_only(mut self, on: bool) -> Self {
        self.relative_only = on;
        self
    }

    pub fn with_max_seq_len(mut self, len: usize) -> Self {
        self.max_seq_len = len;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.dims.len() < 2 {
            return bad("dims needs an input width and at least one layer");
        }
        if self.dims[0] != NODE_FEATURES {
            return bad("input width must be 3 (x, y, ring flag)");
        }
        if self.dims.contains(&0) || self.head_hidden == 0 || self.n_classes == 0 {
            return bad("widths and class count must be positive");
        }
        if self.arch == Arch::VeerCnn && self.max_seq_len == 0 {
            return bad("max_seq_len must be positive");
        }
        if self.arch == Arch::PolyMp && self.aggregation == Pooling::Sum {
            return bad("neighbour aggregation must be mean or max");
        }
        Ok(())
    }
}

/// Length for padded sequences: the longest of `counts`, rounded up to a
/// multiple of 8.
pub fn sequence_length_for(counts: &[usize]) -> usize {
    counts.iter().max().copied().unwrap_or(0).div_ceil(8).max(1) * 8
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Var,
    /// Final feature-layer activations, one row per node (or sequence
    /// position for VeerCNN).
    pub latent: Var,
    /// Rows of `latent` that belong to each graph's real nodes.
    pub graph_rows: Vec<Range<usize>>,
}

pub(crate) fn linear(tape: &mut Tape, p: &BoundParams, name: &str, x: Var) -> Result<Var, ModelError> {
    let w = p.var(&format!("{name}.weight"))?;
    let b = p.var(&format!("{name}.bias"))?;
    let xw = tape.matmul(x, w)?;
    Ok(tape.add(xw, b)?)
}

/// Two-layer classifier applied to pooled graph embeddings.
pub(crate) fn head(tape: &mut Tape, p: &BoundParams, pooled: Var) -> Result<Var, ModelError> {
    let h = linear(tape, p, "head.hidden", pooled)?;
    let h = tape.relu(h)?;
    linear(tape, p, "head.out", h)
}

pub(crate) fn node_matrix(batch: &GraphBatch) -> Tensor {
    Tensor::from_rows(&batch.nodes)
}

/// A configuration with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ModelParams,
}

#[derive(Serialize)]
struct CheckpointOut<'a> {
    arch: Arch,
    config: &'a ModelConfig,
    params: &'a ModelParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<&'a CheckpointMeta>,
}

#[derive(Deserialize)]
struct CheckpointIn {
    arch: Arch,
    config: ModelConfig,
    params: BTreeMap<String, params::TensorRecord>,
    #[serde(default)]
    meta: Option<CheckpointMeta>,
}

/// Training provenance stored alongside a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub class_names: Vec<String>,
}

impl Model {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        config.validate()?;
        params.validate(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    /// Records the forward pass of `graphs` on `tape`.
    pub fn forward(&self, tape: &mut Tape, p: &BoundParams, graphs: &[&PolyGraph]) -> Result<Forward, ModelError> {
        if graphs.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        match self.config.arch {
            Arch::PolyMp => polymp::forward(tape, &self.config, p, &GraphBatch::new(graphs.iter().copied())),
            Arch::DeepSet => deepset::forward(tape, &self.config, p, &GraphBatch::new(graphs.iter().copied())),
            Arch::Gcn => gcn::forward(tape, &self.config, p, graphs),
            Arch::VeerCnn => veercnn::forward(tape, &self.config, p, graphs),
        }
    }

    /// Inference-only logits, `graphs.len() x n_classes`.
    pub fn logits(&self, graphs: &[&PolyGraph]) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let out = self.forward(&mut tape, &p, graphs)?;
        Ok(tape.value(out.logits).clone())
    }

    pub fn predict(&self, graphs: &[&PolyGraph]) -> Result<Vec<usize>, ModelError> {
        let logits = self.logits(graphs)?;
        Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
    }

    fn check_labels(&self, graphs: &[&PolyGraph]) -> Result<Vec<usize>, ModelError> {
        graphs
            .iter()
            .map(|g| {
                let label = g.label();
                if label < self.config.n_classes {
                    Ok(label)
                } else {
                    Err(ModelError::LabelOutOfRange {
                        label,
                        n_classes: self.config.n_classes,
                    })
                }
            })
            .collect()
    }

    /// Mean cross-entropy of the batch against the graphs' labels.
    pub fn loss(&self, graphs: &[&PolyGraph]) -> Result<f64, ModelError> {
        let labels = self.check_labels(graphs)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let out = self.forward(&mut tape, &p, graphs)?;
        let loss = tape.softmax_cross_entropy(out.logits, &labels)?;
        Ok(tape.value(loss).item())
    }

    /// Loss and one gradient tensor per parameter, in parameter order.
    pub fn loss_and_grads(&self, graphs: &[&PolyGraph]) -> Result<(f64, Vec<Tensor>), ModelError> {
        let labels = self.check_labels(graphs)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, true);
        let out = self.forward(&mut tape, &p, graphs)?;
        let loss = tape.softmax_cross_entropy(out.logits, &labels)?;
        let grads = tape.backward(loss)?;
        let per_param = p
            .vars()
            .map(|v| {
                grads
                    .get(v)
                    .unwrap_or_else(|| Tensor::new(tape.value(v).shape().to_vec(), vec![0.0; tape.value(v).len()]).expect("shape"))
            })
            .collect();
        Ok((tape.value(loss).item(), per_param))
    }

    /// Per-node L2 norm of the final latent features divided by the largest
    /// norm in the graph, so values lie in `[0, 1]`.
    pub fn node_saliency(&self, graph: &PolyGraph) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let out = self.forward(&mut tape, &p, &[graph])?;
        let latent = tape.value(out.latent);
        let norms: Vec<f64> = out.graph_rows[0]
            .clone()
            .map(|r| latent.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        Ok(if max > 0.0 {
            norms.iter().map(|n| n / max).collect()
        } else {
            norms
        })
    }

    pub fn to_checkpoint_json(&self, meta: Option<&CheckpointMeta>) -> String {
        serde_json::to_string(&CheckpointOut {
            arch: self.config.arch,
            config: &self.config,
            params: &self.params,
            meta,
        })
        .expect("checkpoint serialization")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<(Self, CheckpointMeta), ModelError> {
        let ck: CheckpointIn = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        if ck.arch != ck.config.arch {
            return Err(ModelError::Incompatible(format!(
                "arch {} disagrees with config arch {}",
                ck.arch, ck.config.arch
            )));
        }
        ck.config.validate()?;
        let params = ModelParams::from_map(&ck.config, ck.params)?;
        Ok((
            Self {
                config: ck.config,
                params,
            },
            ck.meta.unwrap_or_default(),
        ))
    }
}

/// Index of the first maximum.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
