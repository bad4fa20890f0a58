//! Set encoder: every node is transformed independently, then summed.
//! Edges are ignored entirely.

use super::{head, linear, node_matrix, BoundParams, Forward, ModelConfig, ModelError};
use crate::graph::GraphBatch;
use crate::tensor::Tape;

pub fn forward(tape: &mut Tape, cfg: &ModelConfig, p: &BoundParams, batch: &GraphBatch) -> Result<Forward, ModelError> {
    let mut h = tape.constant(node_matrix(batch));
    for l in 1..cfg.dims.len() {
        let z = linear(tape, p, &format!("phi{l}"), h)?;
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

#[cfg(test)]
mod tests {
    use crate::geometry::fixtures::{square_with_hole, unit_square};
    use crate::graph::{encode_graph, PolyGraph};
    use crate::models::{Arch, Model, ModelConfig};

    #[test]
    fn edges_do_not_matter() {
        let g = encode_graph(&square_with_hole(), 0);
        let rewired = g.rewired(vec![(0, 5), (5, 0), (2, 3), (3, 2)]).unwrap();
        let model = Model::init(ModelConfig::new(Arch::DeepSet, 3), 4).unwrap();
        assert_eq!(model.logits(&[&g]).unwrap(), model.logits(&[&rewired]).unwrap());
    }

    #[test]
    fn duplicated_node_changes_output() {
        let g = encode_graph(&unit_square(), 0);
        let mut nodes = g.nodes().to_vec();
        nodes.push(nodes[2]);
        let dup = PolyGraph::with_structure(nodes, vec![], 0).unwrap();
        let model = Model::init(ModelConfig::new(Arch::DeepSet, 3), 4).unwrap();
        let d = model.logits(&[&g]).unwrap().max_abs_diff(&model.logits(&[&dup]).unwrap());
        assert!(d > 1e-9);
    }
}
