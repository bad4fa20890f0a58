//! Polygon-to-graph encoding.
//!
//! Every vertex becomes a node with features `(x, y, ring_flag)`; edges follow
//! the ring boundaries only, so an exterior and its holes form disjoint
//! cycles. Directed edges are materialized in both directions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Polygon;

/// Feature width of a node row: `x`, `y`, ring flag.
pub const NODE_FEATURES: usize = 3;

pub type NodeRow = [f64; NODE_FEATURES];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("edge ({0}, {1}) has no reverse edge")]
    AsymmetricEdge(usize, usize),
    #[error("node {node} has ring flag {flag}, expected 0 or 1")]
    BadFlag { node: usize, flag: f64 },
    #[error("node {node} has {degree} distinct neighbours, ring topology needs 2")]
    NotRingTopology { node: usize, degree: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("permutation is not a bijection on 0..{0}")]
    InvalidPermutation(usize),
    #[error("graph has {n} nodes, more than the sequence length {max_len}")]
    TooManyVertices { n: usize, max_len: usize },
    #[error("non-finite node coordinate at node {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyGraph {
    nodes: Vec<NodeRow>,
    edges: Vec<(usize, usize)>,
    label: usize,
}

fn check_edges(n: usize, edges: &[(usize, usize)]) -> Result<(), GraphError> {
    let mut sorted: Vec<(usize, usize)> = edges.to_vec();
    sorted.sort_unstable();
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(GraphError::EdgeOutOfRange(i, j, n));
        }
        if sorted.binary_search(&(j, i)).is_err() {
            return Err(GraphError::AsymmetricEdge(i, j));
        }
    }
    Ok(())
}

impl PolyGraph {
    /// Builds a graph and checks every invariant, including that each node
    /// has exactly two distinct neighbours.
    pub fn new(nodes: Vec<NodeRow>, edges: Vec<(usize, usize)>, label: usize) -> Result<Self, GraphError> {
        let g = Self::with_structure(nodes, edges, label)?;
        for (node, nb) in g.neighbour_sets().iter().enumerate() {
            if nb.len() != 2 {
                return Err(GraphError::NotRingTopology { node, degree: nb.len() });
            }
        }
        Ok(g)
    }

    /// Like [`PolyGraph::new`] but without the ring-topology requirement;
    /// used for rewiring experiments.
    pub fn with_structure(nodes: Vec<NodeRow>, edges: Vec<(usize, usize)>, label: usize) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        for (node, row) in nodes.iter().enumerate() {
            if !(row[0].is_finite() && row[1].is_finite()) {
                return Err(GraphError::NonFinite(node));
            }
            if row[2] != 0.0 && row[2] != 1.0 {
                return Err(GraphError::BadFlag { node, flag: row[2] });
            }
        }
        check_edges(nodes.len(), &edges)?;
        Ok(Self { nodes, edges, label })
    }

    pub fn nodes(&self) -> &[NodeRow] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    /// Same nodes, different wiring.
    pub fn rewired(&self, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        Self::with_structure(self.nodes.clone(), edges, self.label)
    }

    /// Same wiring, replaced node coordinates.
    pub fn map_coords(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|r| {
                let (x, y) = f(r[0], r[1]);
                [x, y, r[2]]
            })
            .collect();
        Self {
            nodes,
            edges: self.edges.clone(),
            label: self.label,
        }
    }

    /// Sorted distinct neighbour lists.
    pub fn neighbour_sets(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.nodes.len()];
        for &(i, j) in &self.edges {
            if i != j {
                nb[i].push(j);
            }
        }
        for v in &mut nb {
            v.sort_unstable();
            v.dedup();
        }
        nb
    }

    /// Undirected edges as sorted `(min, max)` pairs without duplicates.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut u: Vec<_> = self
            .edges
            .iter()
            .filter(|(i, j)| i < j)
            .copied()
            .collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            label: self.label,
            flags: self.nodes.iter().map(|r| r[2] as u8).collect(),
            coords: self.nodes.iter().map(|r| [r[0], r[1]]).collect(),
            edges: self.undirected_edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }

    pub fn from_record(rec: &GraphRecord) -> Result<Self, GraphError> {
        if rec.flags.len() != rec.coords.len() {
            return Err(GraphError::BadFlag {
                node: rec.flags.len().min(rec.coords.len()),
                flag: f64::NAN,
            });
        }
        let nodes = rec
            .coords
            .iter()
            .zip(&rec.flags)
            .map(|(c, &f)| [c[0], c[1], f64::from(f)])
            .collect();
        Self::new(nodes, materialize(rec.edges.iter().map(|e| (e[0], e[1]))), rec.label)
    }
}

/// Expands undirected pairs into `(i, j), (j, i)` in the given order.
fn materialize(pairs: impl Iterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    pairs.flat_map(|(i, j)| [(i, j), (j, i)]).collect()
}

/// Line-delimited JSON form of a graph; undirected edges appear once with
/// `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub label: usize,
    pub flags: Vec<u8>,
    pub coords: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
}

/// Encodes the exterior (flag 0) then each hole (flag 1) as cycles.
pub fn encode_graph(poly: &Polygon, label: usize) -> PolyGraph {
    let mut nodes = Vec::with_capacity(poly.vertex_count());
    let mut pairs = Vec::with_capacity(poly.vertex_count());
    for (k, ring) in poly.rings().enumerate() {
        let flag = if k == 0 { 0.0 } else { 1.0 };
        let base = nodes.len();
        let len = ring.len();
        nodes.extend(ring.vertices().iter().map(|p| [p.x, p.y, flag]));
        for a in 0..len {
            let (i, j) = (base + a, base + (a + 1) % len);
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    PolyGraph {
        nodes,
        edges: materialize(pairs.into_iter()),
        label,
    }
}

/// Symmetric-normalized weights of the self-loop augmented adjacency
/// `A + I`: `1 / sqrt(d_i d_j)` with `d` counting the self loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    /// Aligned with [`PolyGraph::edges`].
    pub edge: Vec<f64>,
    pub self_loop: Vec<f64>,
}

pub fn laplacian_weights(g: &PolyGraph) -> EdgeWeights {
    let degree: Vec<f64> = g
        .neighbour_sets()
        .iter()
        .map(|nb| (nb.len() + 1) as f64)
        .collect();
    EdgeWeights {
        edge: g
            .edges()
            .iter()
            .map(|&(i, j)| 1.0 / (degree[i] * degree[j]).sqrt())
            .collect(),
        self_loop: degree.iter().map(|d| 1.0 / d).collect(),
    }
}

/// Relabels node `i` as `perm[i]`: rows move to their new index and every
/// edge endpoint is rewritten.
pub fn permute_graph(g: &PolyGraph, perm: &[usize]) -> Result<PolyGraph, GraphError> {
    let n = g.n();
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(GraphError::InvalidPermutation(n));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(GraphError::InvalidPermutation(n));
        }
    }
    let mut nodes = vec![[0.0; NODE_FEATURES]; n];
    for (i, row) in g.nodes.iter().enumerate() {
        nodes[perm[i]] = *row;
    }
    Ok(PolyGraph {
        nodes,
        edges: g.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect(),
        label: g.label,
    })
}

/// Node rows in storage order followed by zero rows up to `max_len`.
pub fn to_padded_sequence(g: &PolyGraph, max_len: usize) -> Result<Vec<NodeRow>, GraphError> {
    if g.n() > max_len {
        return Err(GraphError::TooManyVertices { n: g.n(), max_len });
    }
    let mut rows = g.nodes.clone();
    rows.resize(max_len, [0.0; NODE_FEATURES]);
    Ok(rows)
}

/// Several graphs stacked into one disjoint union, with per-node graph
/// ids for readout.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub nodes: Vec<NodeRow>,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub node_graph: Vec<usize>,
    pub labels: Vec<usize>,
    /// First node index of each graph, plus a final sentinel.
    pub offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn new<'a>(graphs: impl IntoIterator<Item = &'a PolyGraph>) -> Self {
        let mut b = GraphBatch {
            nodes: Vec::new(),
            src: Vec::new(),
            dst: Vec::new(),
            node_graph: Vec::new(),
            labels: Vec::new(),
            offsets: vec![0],
        };
        for (k, g) in graphs.into_iter().enumerate() {
            let base = b.nodes.len();
            b.nodes.extend_from_slice(&g.nodes);
            b.node_graph.extend(std::iter::repeat_n(k, g.n()));
            for &(i, j) in &g.edges {
                b.src.push(base + i);
                b.dst.push(base + j);
            }
            b.labels.push(g.label);
            b.offsets.push(b.nodes.len());
        }
        b
    }

    pub fn n_graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}
