//! Message-passing network over polygon graphs.
//!
//! Each layer computes, for node `i`, `m_i = agg_j |h_j - h_i|` over its
//! graph neighbours and updates `h_i = relu([h_i, m_i] W + b)`. With
//! `relative_only` the first layer sees `m_i` alone, which makes the whole
//! network invariant to translating the input coordinates.

use super::{head, linear, node_matrix, BoundParams, Forward, ModelConfig, ModelError};
use crate::graph::GraphBatch;
use crate::tensor::Tape;

pub fn forward(tape: &mut Tape, cfg: &ModelConfig, p: &BoundParams, batch: &GraphBatch) -> Result<Forward, ModelError> {
    let n = batch.n_nodes();
    let mut h = tape.constant(node_matrix(batch));
    for l in 1..cfg.dims.len() {
        let from = tape.gather_rows(h, &batch.src)?;
        let to = tape.gather_rows(h, &batch.dst)?;
        let diff = tape.sub(from, to)?;
        let msg = tape.abs(diff)?;
        let m = tape.segment_reduce(msg, &batch.dst, n, cfg.aggregation.into())?;
        let z = if l == 1 && cfg.relative_only {
            m
        } else {
            tape.concat_cols(h, m)?
        };
        let z = linear(tape, p, &format!("mp{l}"), z)?;
        h = tape.relu(z)?;
    }
    let pooled = tape.segment_reduce(h, &batch.node_graph, batch.n_graphs(), cfg.pooling.into())?;
    let logits = head(tape, p, pooled)?;
    Ok(Forward {
        logits,
        latent: h,
        graph_rows: batch.offsets.windows(2).map(|w| w[0]..w[1]).collect(),
    })
}
