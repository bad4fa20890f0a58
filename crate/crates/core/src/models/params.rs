use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{Arch, ModelConfig, ModelError};
use crate::tensor::{Tape, Tensor, Var};

/// Named parameter tensors in a fixed, architecture-defined order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Arch,
    entries: Vec<(String, Tensor)>,
}

/// Kind of a parameter slot, used to pick its initializer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Weight,
    Bias,
}

/// `(name, rows, cols, kind)` for every parameter of `cfg`, in order.
pub(crate) fn layout(cfg: &ModelConfig) -> Vec<(String, usize, usize, Slot)> {
    let mut out = Vec::new();
    let mut push_linear = |name: &str, fan_in: usize, fan_out: usize| {
        out.push((format!("{name}.weight"), fan_in, fan_out, Slot::Weight));
        out.push((format!("{name}.bias"), 1, fan_out, Slot::Bias));
    };
    let dims = &cfg.dims;
    for l in 1..dims.len() {
        let (prev, width) = (dims[l - 1], dims[l]);
        let fan_in = match cfg.arch {
            Arch::PolyMp if l == 1 && cfg.relative_only => prev,
            Arch::PolyMp => 2 * prev,
            Arch::VeerCnn => super::veercnn::KERNEL * prev,
            Arch::DeepSet | Arch::Gcn => prev,
        };
        push_linear(&format!("{}{l}", cfg.arch.layer_prefix()), fan_in, width);
    }
    let last = *dims.last().expect("dims validated non-empty");
    push_linear("head.hidden", last, cfg.head_hidden);
    push_linear("head.out", cfg.head_hidden, cfg.n_classes);
    out
}

impl ModelParams {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero
    /// biases. Deterministic in `seed`.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = layout(cfg)
            .into_iter()
            .map(|(name, rows, cols, slot)| {
                let data = match slot {
                    Slot::Bias => vec![0.0; rows * cols],
                    Slot::Weight => {
                        let limit = (6.0 / (rows + cols) as f64).sqrt();
                        (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect()
                    }
                };
                (name, Tensor::matrix(rows, cols, data).expect("layout shape"))
            })
            .collect();
        Self { arch: cfg.arch, entries }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_finite())
    }

    /// Records every tensor on `tape`, as trainable leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        BoundParams {
            vars: self
                .entries
                .iter()
                .map(|(n, t)| {
                    let v = if trainable {
                        tape.param(t.clone())
                    } else {
                        tape.constant(t.clone())
                    };
                    (n.clone(), v)
                })
                .collect(),
        }
    }

    /// Checks names and shapes against `cfg`.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        if self.arch != cfg.arch {
            return Err(ModelError::Incompatible(format!(
                "parameters are for {} but config is {}",
                self.arch, cfg.arch
            )));
        }
        let expected = layout(cfg);
        if expected.len() != self.entries.len() {
            return Err(ModelError::Incompatible(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                self.entries.len()
            )));
        }
        for ((name, rows, cols, _), (have, t)) in expected.iter().zip(&self.entries) {
            if name != have || t.shape() != [*rows, *cols] {
                return Err(ModelError::Incompatible(format!(
                    "parameter `{have}` {:?} does not match expected `{name}` [{rows}, {cols}]",
                    t.shape()
                )));
            }
        }
        if !self.is_finite() {
            return Err(ModelError::Incompatible("non-finite parameter value".into()));
        }
        Ok(())
    }

    /// Rebuilds parameters for `cfg` from a name-keyed map.
    pub(crate) fn from_map(cfg: &ModelConfig, mut map: BTreeMap<String, TensorRecord>) -> Result<Self, ModelError> {
        let mut entries = Vec::new();
        for (name, rows, cols, _) in layout(cfg) {
            let rec = map
                .remove(&name)
                .ok_or_else(|| ModelError::Incompatible(format!("missing parameter `{name}`")))?;
            if rec.shape != [rows, cols] {
                return Err(ModelError::Incompatible(format!(
                    "parameter `{name}` has shape {:?}, config needs [{rows}, {cols}]",
                    rec.shape
                )));
            }
            let t = Tensor::new(rec.shape, rec.data)
                .map_err(|e| ModelError::Incompatible(format!("parameter `{name}`: {e}")))?;
            entries.push((name, t));
        }
        if let Some(extra) = map.keys().next() {
            return Err(ModelError::Incompatible(format!("unexpected parameter `{extra}`")));
        }
        let params = Self { arch: cfg.arch, entries };
        params.validate(cfg)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Serialize for ModelParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Rec<'a> {
            shape: &'a [usize],
            data: &'a [f64],
        }
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for (name, t) in &self.entries {
            map.serialize_entry(
                name,
                &Rec {
                    shape: t.shape(),
                    data: t.data(),
                },
            )?;
        }
        map.end()
    }
}

/// Parameter handles on one tape.
#[derive(Debug, Clone)]
pub struct BoundParams {
    vars: Vec<(String, Var)>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var, ModelError> {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| ModelError::Incompatible(format!("missing parameter `{name}`")))
    }

    /// Handles in parameter order.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars.iter().map(|(_, v)| *v)
    }
}
