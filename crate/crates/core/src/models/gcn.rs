//! Graph convolution with symmetric-normalized `A + I` weights: each layer
//! computes `relu((sum_j w_ij h_j + w_ii h_i) W + b)`.

use super::{head, linear, node_matrix, BoundParams, Forward, ModelConfig, ModelError};
use crate::graph::{laplacian_weights, GraphBatch, PolyGraph};
use crate::tensor::{Reduce, Tape};

pub fn forward(tape: &mut Tape, cfg: &ModelConfig, p: &BoundParams, graphs: &[&PolyGraph]) -> Result<Forward, ModelError> {
    let batch = GraphBatch::new(graphs.iter().copied());
    let mut edge_w = Vec::with_capacity(batch.src.len());
    let mut self_w = Vec::with_capacity(batch.n_nodes());
    for g in graphs {
        let w = laplacian_weights(g);
        edge_w.extend(w.edge);
        self_w.extend(w.self_loop);
    }
    let n = batch.n_nodes();
    let mut h = tape.constant(node_matrix(&batch));
    for l in 1..cfg.dims.len() {
        let from = tape.gather_rows(h, &batch.src)?;
        let weighted = tape.scale_rows(from, &edge_w)?;
        let neigh = tape.segment_reduce(weighted, &batch.dst, n, Reduce::Sum)?;
        let own = tape.scale_rows(h, &self_w)?;
        let agg = tape.add(neigh, own)?;
        let z = linear(tape, p, &format!("gcn{l}"), agg)?;
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
