use std::sync::OnceLock;

use super::{Tensor, TensorError};

fn nan_check_enabled() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| std::env::var("POLY_NAN_CHECK").is_ok_and(|v| v == "1"))
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add { a: Var, b: Var, broadcast: bool },
    Sub { a: Var, b: Var, broadcast: bool },
    MulScalar(Var, f64),
    Abs(Var),
    Relu(Var),
    ConcatCols(Var, Var),
    Gather { x: Var, idx: Vec<Option<usize>> },
    ScaleRows { x: Var, w: Vec<f64> },
    SegmentSum { x: Var, seg: Vec<usize> },
    SegmentMean { x: Var, seg: Vec<usize>, counts: Vec<usize> },
    /// Source row per output entry, `None` for empty segments.
    SegmentMax { x: Var, argmax: Vec<Option<usize>> },
    SumAll(Var),
    SoftmaxCrossEntropy { logits: Var, probs: Vec<f64>, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single-threaded computation context.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction and backward is a reverse scan.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients indexed by [`Var`]; `None` for nodes that do not require them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.shapes[v.0].clone(), g.clone()).expect("gradient shape"))
    }

    pub fn data(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0)?.as_deref()
    }

    pub fn data_mut(&mut self, v: Var) -> Option<&mut [f64]> {
        self.grads.get_mut(v.0)?.as_deref_mut()
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn add_into(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// `c[m x n] += a[m x k] * b[k x n]`
fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != 0.0 {
                add_into(crow, &b[p * n..(p + 1) * n], av);
            }
        }
    }
}

/// `c[m x k] += g[m x n] * b[k x n]^T`
fn gemm_nt(g: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            c[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `c[k x n] += a[m x k]^T * g[m x n]`
fn gemm_tn(a: &[f64], g: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != 0.0 {
                add_into(&mut c[p * n..(p + 1) * n], grow, av);
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    /// A trainable leaf whose gradient is reported by backward.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var, TensorError> {
        if nan_check_enabled() && !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (ta.dims(), tb.dims());
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(ta.data(), tb.data(), &mut out, m, k, n);
        let value = Tensor::matrix(m, n, out)?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, sign: f64) -> Result<(Tensor, bool), TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, n) = ta.dims();
        let broadcast = if ta.shape() == tb.shape() {
            false
        } else if tb.dims() == (1, n) {
            true
        } else {
            return Err(mismatch(name, ta, tb));
        };
        let mut out = ta.data().to_vec();
        if broadcast {
            for row in out.chunks_mut(n.max(1)).take(m) {
                add_into(row, tb.data(), sign);
            }
        } else {
            add_into(&mut out, tb.data(), sign);
        }
        Ok((Tensor::new(ta.shape().to_vec(), out)?, broadcast))
    }

    /// Elementwise sum; `b` may also be a `1 x n` row added to every row.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (value, broadcast) = self.binary("add", a, b, 1.0)?;
        self.push("add", value, Op::Add { a, b, broadcast }, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (value, broadcast) = self.binary("sub", a, b, -1.0)?;
        self.push("sub", value, Op::Sub { a, b, broadcast }, &[a, b])
    }

    pub fn mul_scalar(&mut self, a: Var, s: f64) -> Result<Var, TensorError> {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * s).collect())?;
        self.push("mul_scalar", value, Op::MulScalar(a, s), &[a])
    }

    pub fn abs(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v.abs()).collect())?;
        self.push("abs", value, Op::Abs(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| v.max(0.0)).collect())?;
        self.push("relu", value, Op::Relu(a), &[a])
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, na), (m2, nb)) = (ta.dims(), tb.dims());
        if m != m2 {
            return Err(mismatch("concat_cols", ta, tb));
        }
        let mut out = Vec::with_capacity(m * (na + nb));
        for i in 0..m {
            out.extend_from_slice(ta.row(i));
            out.extend_from_slice(tb.row(i));
        }
        let value = Tensor::matrix(m, na + nb, out)?;
        self.push("concat_cols", value, Op::ConcatCols(a, b), &[a, b])
    }

    /// Output row `i` is row `idx[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let opt: Vec<Option<usize>> = idx.iter().map(|&i| Some(i)).collect();
        self.gather_impl("gather_rows", x, opt)
    }

    /// Like [`Tape::gather_rows`], with `None` producing a zero row.
    pub fn gather_rows_or_zero(&mut self, x: Var, idx: &[Option<usize>]) -> Result<Var, TensorError> {
        self.gather_impl("gather_rows_or_zero", x, idx.to_vec())
    }

    fn gather_impl(&mut self, name: &'static str, x: Var, idx: Vec<Option<usize>>) -> Result<Var, TensorError> {
        let t = self.value(x);
        let (n, d) = t.dims();
        let mut out = Vec::with_capacity(idx.len() * d);
        for i in &idx {
            match *i {
                Some(i) if i >= n => {
                    return Err(TensorError::IndexOutOfRange { op: name, index: i, bound: n })
                }
                Some(i) => out.extend_from_slice(t.row(i)),
                None => out.extend(std::iter::repeat_n(0.0, d)),
            }
        }
        let value = Tensor::matrix(idx.len(), d, out)?;
        self.push(name, value, Op::Gather { x, idx }, &[x])
    }

    /// Multiplies row `i` by the constant `w[i]`.
    pub fn scale_rows(&mut self, x: Var, w: &[f64]) -> Result<Var, TensorError> {
        let t = self.value(x);
        let (m, d) = t.dims();
        if w.len() != m {
            return Err(TensorError::ShapeMismatch {
                op: "scale_rows",
                left: t.shape().to_vec(),
                right: vec![w.len()],
            });
        }
        let mut out = t.data().to_vec();
        for (row, &s) in out.chunks_mut(d.max(1)).zip(w) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        let value = Tensor::matrix(m, d, out)?;
        self.push("scale_rows", value, Op::ScaleRows { x, w: w.to_vec() }, &[x])
    }

    /// Reduces rows of `x` into `n_seg` output rows by segment id. Rows are
    /// visited in ascending order; empty segments yield zero rows and max
    /// ties resolve to the first row.
    pub fn segment_reduce(&mut self, x: Var, seg: &[usize], n_seg: usize, mode: Reduce) -> Result<Var, TensorError> {
        let t = self.value(x);
        let (m, d) = t.dims();
        if seg.len() != m {
            return Err(TensorError::ShapeMismatch {
                op: "segment_reduce",
                left: t.shape().to_vec(),
                right: vec![seg.len()],
            });
        }
        if let Some(&bad) = seg.iter().find(|&&s| s >= n_seg) {
            return Err(TensorError::IndexOutOfRange {
                op: "segment_reduce",
                index: bad,
                bound: n_seg,
            });
        }
        let mut out = vec![0.0; n_seg * d];
        let op = match mode {
            Reduce::Sum | Reduce::Mean => {
                let mut counts = vec![0usize; n_seg];
                for (i, &s) in seg.iter().enumerate() {
                    counts[s] += 1;
                    add_into(&mut out[s * d..(s + 1) * d], t.row(i), 1.0);
                }
                if mode == Reduce::Sum {
                    Op::SegmentSum { x, seg: seg.to_vec() }
                } else {
                    for (s, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                        out[s * d..(s + 1) * d].iter_mut().for_each(|v| *v /= c as f64);
                    }
                    Op::SegmentMean { x, seg: seg.to_vec(), counts }
                }
            }
            Reduce::Max => {
                let mut argmax: Vec<Option<usize>> = vec![None; n_seg * d];
                for (i, &s) in seg.iter().enumerate() {
                    for (c, &v) in t.row(i).iter().enumerate() {
                        let k = s * d + c;
                        if argmax[k].is_none() || v > out[k] {
                            argmax[k] = Some(i);
                            out[k] = v;
                        }
                    }
                }
                Op::SegmentMax { x, argmax }
            }
        };
        let value = Tensor::matrix(n_seg, d, out)?;
        self.push("segment_reduce", value, op, &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.value(x).data().iter().sum();
        self.push("sum_all", Tensor::scalar(s), Op::SumAll(x), &[x])
    }

    /// Mean over rows of `-log softmax(logits)[label]`, stabilized by
    /// subtracting the row maximum.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        let t = self.value(logits);
        let (b, c) = t.dims();
        if labels.len() != b || b == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_cross_entropy",
                left: t.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        let mut probs = Vec::with_capacity(b * c);
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(TensorError::IndexOutOfRange {
                    op: "softmax_cross_entropy",
                    index: y,
                    bound: c,
                });
            }
            let row = t.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = z.ln();
            loss += log_z - (row[y] - max);
            probs.extend(row.iter().map(|v| (v - max - log_z).exp()));
        }
        let value = Tensor::scalar(loss / b as f64);
        self.push(
            "softmax_cross_entropy",
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
            &[logits],
        )
    }

    /// Reverse-mode sweep from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let out = &self.nodes[output.0].value;
        if out.len() != 1 {
            return Err(TensorError::NotScalar(out.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[output.0].requires_grad {
            grads[output.0] = Some(vec![1.0]);
        }
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn backprop_node(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        // Lazily allocated gradient buffer for an input, or None if the input
        // does not take gradients.
        let slot = |v: Var, grads: &mut [Option<Vec<f64>>]| -> bool {
            if !nodes[v.0].requires_grad {
                return false;
            }
            if grads[v.0].is_none() {
                grads[v.0] = Some(vec![0.0; nodes[v.0].value.len()]);
            }
            true
        };
        let out = &nodes[idx].value;
        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                let ((m, k), (_, n)) = (ta.dims(), tb.dims());
                if slot(*a, grads) {
                    gemm_nt(g, tb.data(), grads[a.0].as_mut().unwrap(), m, k, n);
                }
                if slot(*b, grads) {
                    gemm_tn(ta.data(), g, grads[b.0].as_mut().unwrap(), m, k, n);
                }
            }
            Op::Add { a, b, broadcast } | Op::Sub { a, b, broadcast } => {
                let sign = if matches!(nodes[idx].op, Op::Sub { .. }) { -1.0 } else { 1.0 };
                if slot(*a, grads) {
                    add_into(grads[a.0].as_mut().unwrap(), g, 1.0);
                }
                if slot(*b, grads) {
                    let gb = grads[b.0].as_mut().unwrap();
                    if *broadcast {
                        for row in g.chunks(gb.len().max(1)) {
                            add_into(gb, row, sign);
                        }
                    } else {
                        add_into(gb, g, sign);
                    }
                }
            }
            Op::MulScalar(a, s) => {
                if slot(*a, grads) {
                    add_into(grads[a.0].as_mut().unwrap(), g, *s);
                }
            }
            Op::Abs(a) => {
                if slot(*a, grads) {
                    let x = nodes[a.0].value.data();
                    let ga = grads[a.0].as_mut().unwrap();
                    for ((d, &xi), &gi) in ga.iter_mut().zip(x).zip(g) {
                        if xi > 0.0 {
                            *d += gi;
                        } else if xi < 0.0 {
                            *d -= gi;
                        }
                    }
                }
            }
            Op::Relu(a) => {
                if slot(*a, grads) {
                    let ga = grads[a.0].as_mut().unwrap();
                    for ((d, &y), &gi) in ga.iter_mut().zip(out.data()).zip(g) {
                        if y > 0.0 {
                            *d += gi;
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let na = nodes[a.0].value.cols();
                let nb = nodes[b.0].value.cols();
                let w = na + nb;
                if slot(*a, grads) {
                    let ga = grads[a.0].as_mut().unwrap();
                    for (dst, src) in ga.chunks_mut(na.max(1)).zip(g.chunks(w.max(1))) {
                        add_into(dst, &src[..na], 1.0);
                    }
                }
                if slot(*b, grads) {
                    let gb = grads[b.0].as_mut().unwrap();
                    for (dst, src) in gb.chunks_mut(nb.max(1)).zip(g.chunks(w.max(1))) {
                        add_into(dst, &src[na..], 1.0);
                    }
                }
            }
            Op::Gather { x, idx: rows } => {
                if slot(*x, grads) {
                    let d = nodes[x.0].value.cols();
                    let gx = grads[x.0].as_mut().unwrap();
                    for (r, src) in rows.iter().zip(g.chunks(d.max(1))) {
                        if let Some(r) = *r {
                            add_into(&mut gx[r * d..(r + 1) * d], src, 1.0);
                        }
                    }
                }
            }
            Op::ScaleRows { x, w } => {
                if slot(*x, grads) {
                    let d = nodes[x.0].value.cols();
                    let gx = grads[x.0].as_mut().unwrap();
                    for ((dst, src), &s) in gx.chunks_mut(d.max(1)).zip(g.chunks(d.max(1))).zip(w) {
                        add_into(dst, src, s);
                    }
                }
            }
            Op::SegmentSum { x, seg } => {
                if slot(*x, grads) {
                    let d = nodes[x.0].value.cols();
                    let gx = grads[x.0].as_mut().unwrap();
                    for (i, &s) in seg.iter().enumerate() {
                        add_into(&mut gx[i * d..(i + 1) * d], &g[s * d..(s + 1) * d], 1.0);
                    }
                }
            }
            Op::SegmentMean { x, seg, counts } => {
                if slot(*x, grads) {
                    let d = nodes[x.0].value.cols();
                    let gx = grads[x.0].as_mut().unwrap();
                    for (i, &s) in seg.iter().enumerate() {
                        let inv = 1.0 / counts[s] as f64;
                        add_into(&mut gx[i * d..(i + 1) * d], &g[s * d..(s + 1) * d], inv);
                    }
                }
            }
            Op::SegmentMax { x, argmax } => {
                if slot(*x, grads) {
                    let d = nodes[x.0].value.cols();
                    let gx = grads[x.0].as_mut().unwrap();
                    for (k, src) in argmax.iter().enumerate() {
                        if let Some(i) = *src {
                            gx[i * d + k % d] += g[k];
                        }
                    }
                }
            }
            Op::SumAll(x) => {
                if slot(*x, grads) {
                    grads[x.0].as_mut().unwrap().iter_mut().for_each(|v| *v += g[0]);
                }
            }
            Op::SoftmaxCrossEntropy { logits, probs, labels } => {
                if slot(*logits, grads) {
                    let c = nodes[logits.0].value.cols();
                    let scale = g[0] / labels.len() as f64;
                    let gl = grads[logits.0].as_mut().unwrap();
                    for (i, &y) in labels.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == y { 1.0 } else { 0.0 };
                            gl[i * c + j] += scale * (probs[i * c + j] - onehot);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    /// Central differences of `f` with respect to every entry of `x0`.
    fn fd_grad(x0: &Tensor, f: impl Fn(&Tensor) -> f64) -> Vec<f64> {
        let eps = 1e-5;
        (0..x0.len())
            .map(|i| {
                let mut xp = x0.clone();
                xp.data_mut()[i] += eps;
                let mut xm = x0.clone();
                xm.data_mut()[i] -= eps;
                (f(&xp) - f(&xm)) / (2.0 * eps)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn matmul_values() {
        let mut tape = Tape::new();
        let eye = tape.constant(t(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let b = tape.constant(t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let c = tape.matmul(eye, b).unwrap();
        assert_eq!(tape.value(c), tape.value(b));

        let a = tape.constant(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let ones = tape.constant(t(2, 1, &[1.0, 1.0]));
        let c = tape.matmul(a, ones).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
        assert!(matches!(tape.matmul(a, b).and_then(|_| tape.matmul(b, a)), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let a0 = t(3, 4, &[0.3, -1.2, 0.5, 2.0, 1.1, 0.0, -0.7, 0.4, 0.9, -0.2, 1.5, -1.0]);
        let b0 = t(4, 2, &[0.5, -0.3, 1.2, 0.8, -0.6, 0.1, 0.25, -1.4]);
        let f = |a: &Tensor| {
            let mut tape = Tape::new();
            let a = tape.constant(a.clone());
            let b = tape.constant(b0.clone());
            let c = tape.matmul(a, b).unwrap();
            let s = tape.sum_all(c).unwrap();
            tape.value(s).item()
        };
        let mut tape = Tape::new();
        let a = tape.param(a0.clone());
        let b = tape.constant(b0.clone());
        let c = tape.matmul(a, b).unwrap();
        let s = tape.sum_all(c).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(rel_err(g.data(a).unwrap(), &fd_grad(&a0, f)) < 1e-6);
        assert!(g.data(b).is_none());
    }

    #[test]
    fn elementwise_values_and_grads() {
        let mut tape = Tape::new();
        let x = tape.param(t(1, 3, &[-1.0, 0.0, 2.0]));
        let r = tape.relu(x).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

        let y = tape.param(t(1, 2, &[-3.0, 4.0]));
        let a = tape.abs(y).unwrap();
        assert_eq!(tape.value(a).data(), &[3.0, 4.0]);
        let s = tape.sum_all(a).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.data(y).unwrap(), &[-1.0, 1.0]);

        let mut tape = Tape::new();
        let z = tape.param(t(1, 2, &[0.0, 1.0]));
        let a = tape.abs(z).unwrap();
        let s = tape.sum_all(a).unwrap();
        assert_eq!(tape.backward(s).unwrap().data(z).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn broadcast_add_and_concat() {
        let mut tape = Tape::new();
        let x = tape.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.param(t(1, 2, &[10.0, 20.0]));
        let y = tape.add(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[11.0, 22.0, 13.0, 24.0]);
        let d = tape.sub(x, b).unwrap();
        assert_eq!(tape.value(d).data(), &[-9.0, -18.0, -7.0, -16.0]);
        let c = tape.concat_cols(y, x).unwrap();
        assert_eq!(tape.value(c).shape(), &[2, 4]);
        assert_eq!(tape.value(c).row(1), &[13.0, 24.0, 3.0, 4.0]);
        let cd = tape.concat_cols(c, d).unwrap();
        let s = tape.sum_all(cd).unwrap();
        let g = tape.backward(s).unwrap();
        // y and x and d each contribute.
        assert_eq!(g.data(x).unwrap(), &[3.0, 3.0, 3.0, 3.0]);
        assert_eq!(g.data(b).unwrap(), &[0.0, 0.0]);

        let bad = tape.constant(t(1, 3, &[0.0; 3]));
        assert!(tape.add(x, bad).is_err());
        let tall = tape.constant(t(3, 1, &[0.0; 3]));
        assert!(tape.concat_cols(x, tall).is_err());
    }

    #[test]
    fn gather_examples() {
        let mut tape = Tape::new();
        let x = tape.param(t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let all = tape.gather_rows(x, &[0, 1, 2]).unwrap();
        assert_eq!(tape.value(all), tape.value(x));
        let empty = tape.gather_rows(x, &[]).unwrap();
        assert_eq!(tape.value(empty).shape(), &[0, 2]);
        let rep = tape.gather_rows(x, &[0, 0]).unwrap();
        let s = tape.sum_all(rep).unwrap();
        assert_eq!(tape.backward(s).unwrap().data(x).unwrap(), &[2.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            tape.gather_rows(x, &[3]),
            Err(TensorError::IndexOutOfRange { index: 3, bound: 3, .. })
        ));
        let padded = tape.gather_rows_or_zero(x, &[None, Some(2)]).unwrap();
        assert_eq!(tape.value(padded).data(), &[0.0, 0.0, 5.0, 6.0]);
    }

    #[test]
    fn segment_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let s = tape.segment_reduce(x, &[0, 0, 0], 1, Reduce::Sum).unwrap();
        assert_eq!(tape.value(s).data(), &[9.0, 12.0]);
        let m = tape.segment_reduce(x, &[0, 1, 2], 3, Reduce::Mean).unwrap();
        assert_eq!(tape.value(m), tape.value(x));
        let e = tape.segment_reduce(x, &[0, 0, 2], 3, Reduce::Max).unwrap();
        assert_eq!(tape.value(e).data(), &[3.0, 4.0, 0.0, 0.0, 5.0, 6.0]);
        assert!(matches!(
            tape.segment_reduce(x, &[0, 0, 3], 3, Reduce::Sum),
            Err(TensorError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn max_ties_route_to_first_row() {
        let mut tape = Tape::new();
        let x = tape.param(t(3, 1, &[2.0, 2.0, 1.0]));
        let m = tape.segment_reduce(x, &[0, 0, 0], 1, Reduce::Max).unwrap();
        let s = tape.sum_all(m).unwrap();
        assert_eq!(tape.backward(s).unwrap().data(x).unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn segment_max_gradient_matches_finite_differences() {
        let x0 = t(
            6,
            3,
            &[
                0.1, -0.4, 1.3, 0.7, 0.2, -0.9, -1.1, 0.8, 0.05, 0.35, 1.9, -0.3, 0.6, -0.75, 0.45, -0.2, 0.15, 1.05,
            ],
        );
        let w0 = t(3, 2, &[0.3, -0.8, 1.1, 0.4, -0.5, 0.9]);
        let seg = [0, 1, 0, 1, 1, 0];
        let eval = |x: Var, tape: &mut Tape| {
            let w = tape.constant(w0.clone());
            let m = tape.segment_reduce(x, &seg, 2, Reduce::Max).unwrap();
            let y = tape.matmul(m, w).unwrap();
            tape.sum_all(y).unwrap()
        };
        let f = |x: &Tensor| {
            let mut tape = Tape::new();
            let x = tape.constant(x.clone());
            let out = eval(x, &mut tape);
            tape.value(out).item()
        };
        let mut tape = Tape::new();
        let x = tape.param(x0.clone());
        let out = eval(x, &mut tape);
        let g = tape.backward(out).unwrap();
        assert!(rel_err(g.data(x).unwrap(), &fd_grad(&x0, f)) < 1e-5);
    }

    #[test]
    fn cross_entropy_examples() {
        let mut tape = Tape::new();
        let logits = tape.param(Tensor::zeros(3, 26));
        let l = tape.softmax_cross_entropy(logits, &[0, 5, 25]).unwrap();
        assert!((tape.value(l).item() - 26f64.ln()).abs() < 1e-12);

        let mut sharp = Tensor::zeros(1, 4);
        sharp.data_mut()[2] = 100.0;
        let s = tape.constant(sharp);
        let l = tape.softmax_cross_entropy(s, &[2]).unwrap();
        assert!(tape.value(l).item() < 1e-8);
        assert!(matches!(
            tape.softmax_cross_entropy(s, &[4]),
            Err(TensorError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn cross_entropy_gradient() {
        let x0 = t(2, 3, &[0.2, -1.0, 0.5, 1.5, 0.3, -0.2]);
        let labels = [2, 0];
        let f = |x: &Tensor| {
            let mut tape = Tape::new();
            let x = tape.constant(x.clone());
            let l = tape.softmax_cross_entropy(x, &labels).unwrap();
            tape.value(l).item()
        };
        let mut tape = Tape::new();
        let x = tape.param(x0.clone());
        let l = tape.softmax_cross_entropy(x, &labels).unwrap();
        let g = tape.backward(l).unwrap();
        assert!(rel_err(g.data(x).unwrap(), &fd_grad(&x0, f)) < 1e-6);
    }

    #[test]
    fn scale_rows_and_mul_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let y = tape.scale_rows(x, &[0.5, 2.0]).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 1.0, 6.0, 8.0]);
        let z = tape.mul_scalar(y, -1.0).unwrap();
        let s = tape.sum_all(z).unwrap();
        assert_eq!(tape.backward(s).unwrap().data(x).unwrap(), &[-0.5, -0.5, -2.0, -2.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(TensorError::NotScalar(_))));
    }

    proptest! {
        #[test]
        fn segment_sum_ignores_row_order_within_segments(
            rows in prop::collection::vec((0usize..4, -10.0f64..10.0, -10.0f64..10.0), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..rows.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let build = |order: &[usize]| {
                let seg: Vec<usize> = order.iter().map(|&i| rows[i].0).collect();
                let data: Vec<f64> = order.iter().flat_map(|&i| [rows[i].1, rows[i].2]).collect();
                let mut tape = Tape::new();
                let x = tape.constant(Tensor::matrix(order.len(), 2, data).unwrap());
                let s = tape.segment_reduce(x, &seg, 4, Reduce::Sum).unwrap();
                tape.value(s).clone()
            };
            let ident: Vec<usize> = (0..rows.len()).collect();
            prop_assert!(build(&ident).max_abs_diff(&build(&perm)) < 1e-9);
        }

        #[test]
        fn cross_entropy_is_shift_invariant(
            logits in prop::collection::vec(-20.0f64..20.0, 5),
            shift in -100.0f64..100.0,
            label in 0usize..5,
        ) {
            let eval = |v: Vec<f64>| {
                let mut tape = Tape::new();
                let x = tape.constant(Tensor::matrix(1, 5, v).unwrap());
                let l = tape.softmax_cross_entropy(x, &[label]).unwrap();
                tape.value(l).item()
            };
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            prop_assert!((eval(logits) - eval(shifted)).abs() < 1e-12);
        }
    }
}
