//! 1D convolutional baseline over zero-padded vertex sequences.
//!
//! Vertices are read in storage order, padded with zero rows to
//! `max_seq_len`, passed through same-padded convolutions of width
//! [`KERNEL`] and averaged over all positions. Graphs longer than the
//! sequence length are truncated.

use std::sync::atomic::{AtomicBool, Ordering};

use super::{head, linear, BoundParams, Forward, ModelConfig, ModelError};
use crate::graph::{PolyGraph, NODE_FEATURES};
use crate::tensor::{Tape, Tensor};

pub const KERNEL: usize = 3;

static WARNED_TRUNCATION: AtomicBool = AtomicBool::new(false);

/// Stacks every graph as `max_seq_len` rows (truncating or zero padding).
pub fn padded_input(graphs: &[&PolyGraph], max_len: usize) -> Tensor {
    let mut data = Vec::with_capacity(graphs.len() * max_len * NODE_FEATURES);
    for g in graphs {
        if g.n() > max_len && !WARNED_TRUNCATION.swap(true, Ordering::Relaxed) {
            log::warn!("sequence of {} vertices truncated to {max_len}", g.n());
        }
        let take = g.n().min(max_len);
        data.extend(g.nodes()[..take].iter().flatten());
        data.extend(std::iter::repeat_n(0.0, (max_len - take) * NODE_FEATURES));
    }
    Tensor::matrix(graphs.len() * max_len, NODE_FEATURES, data).expect("padded shape")
}

pub fn forward(tape: &mut Tape, cfg: &ModelConfig, p: &BoundParams, graphs: &[&PolyGraph]) -> Result<Forward, ModelError> {
    let len = cfg.max_seq_len;
    let b = graphs.len();
    let rows = b * len;
    let pos = |r: usize| r % len;
    let prev: Vec<Option<usize>> = (0..rows).map(|r| (pos(r) > 0).then(|| r - 1)).collect();
    let next: Vec<Option<usize>> = (0..rows).map(|r| (pos(r) + 1 < len).then(|| r + 1)).collect();
    let seq: Vec<usize> = (0..rows).map(|r| r / len).collect();

    let mut h = tape.constant(padded_input(graphs, len));
    for l in 1..cfg.dims.len() {
        let left = tape.gather_rows_or_zero(h, &prev)?;
        let right = tape.gather_rows_or_zero(h, &next)?;
        let window = tape.concat_cols(left, h)?;
        let window = tape.concat_cols(window, right)?;
        let z = linear(tape, p, &format!("conv{l}"), window)?;
        h = tape.relu(z)?;
    }
    let pooled = tape.segment_reduce(h, &seq, b, cfg.pooling.into())?;
    let logits = head(tape, p, pooled)?;
    Ok(Forward {
        logits,
        latent: h,
        graph_rows: graphs
            .iter()
            .enumerate()
            .map(|(k, g)| k * len..k * len + g.n().min(len))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use crate::geometry::fixtures::square_with_hole;
    use crate::geometry::normalize;
    use crate::graph::{encode_graph, PolyGraph};
    use crate::models::{Arch, Model, ModelConfig};

    fn model() -> Model {
        Model::init(ModelConfig::new(Arch::VeerCnn, 6).with_max_seq_len(16), 9).unwrap()
    }

    #[test]
    fn zero_input_gives_output_bias() {
        let mut m = model();
        let bias = [0.5, -1.0, 2.0, 0.0, 0.25, 3.0];
        m.params_mut().get_mut("head.out.bias").unwrap().data_mut().copy_from_slice(&bias);
        let g = PolyGraph::with_structure(vec![[0.0; 3]; 5], vec![], 0).unwrap();
        assert_eq!(m.logits(&[&g]).unwrap().data(), &bias);
    }

    #[test]
    fn sensitive_to_loop_origin_and_translation() {
        let g = encode_graph(&normalize(&square_with_hole()).unwrap(), 0);
        let n = g.n();
        let shifted = crate::graph::permute_graph(&g, &(0..n).map(|i| (i + 1) % n).collect::<Vec<_>>()).unwrap();
        let moved = g.map_coords(|x, y| (x + 1.0, y - 2.0));
        let m = model();
        let base = m.logits(&[&g]).unwrap();
        assert!(base.max_abs_diff(&m.logits(&[&shifted]).unwrap()) > 1e-9);
        assert!(base.max_abs_diff(&m.logits(&[&moved]).unwrap()) > 1e-9);
    }

    #[test]
    fn long_sequences_are_truncated() {
        let g = encode_graph(&normalize(&square_with_hole()).unwrap(), 0);
        let m = Model::init(ModelConfig::new(Arch::VeerCnn, 3).with_max_seq_len(4), 0).unwrap();
        assert_eq!(m.logits(&[&g, &g]).unwrap().shape(), &[2, 3]);
        assert_eq!(m.node_saliency(&g).unwrap().len(), 4);
    }
}
