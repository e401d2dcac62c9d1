use std::sync::Arc;

use super::{Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Arc<Tensor>),
    SubConst(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Var, Var),
    SumRows(Var),
    SumAll(Var),
    SelectCol(Var, usize),
    SegmentSum(Var, Arc<[usize]>),
    NeighborSum(Var, Arc<[(usize, usize)]>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, so parents always precede their
/// children and a single reverse sweep computes all gradients.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    recording: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

/// Gradients of a scalar root with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of `var`, or `None` if the root does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, zero-filled if the root does not depend on it.
    pub fn get_or_zeros(&self, var: Var) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| {
            let (r, c) = self.shapes[var.0];
            Tensor::zeros(r, c)
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            recording: true,
        }
    }

    /// A tape that evaluates values but keeps no operation history;
    /// [`Tape::backward`] then only reaches the root itself.
    pub fn inference() -> Self {
        Tape {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let op = if self.recording { op } else { Op::Leaf };
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, name: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(TensorError::shape(name, x, y));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", v, Op::Sub(a, b))
    }

    /// Adds the 1×c row `row` to every row of `a`.
    pub fn add_broadcast_rows(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(TensorError::shape("add_broadcast_rows", x, r));
        }
        let mut v = x.clone();
        let c = x.cols();
        let bias = r.data().to_vec();
        for chunk in v.data_mut().chunks_mut(c.max(1)) {
            for (o, b) in chunk.iter_mut().zip(&bias) {
                *o += b;
            }
        }
        self.push("add_broadcast_rows", v, Op::AddRow(a, row))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("hadamard", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("hadamard", v, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, TensorError> {
        let v = self.value(a).map(|x| x * k);
        self.push("scale", v, Op::Scale(a, k))
    }

    /// Elementwise product with a constant (masks, dropout).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var, TensorError> {
        let x = self.value(a);
        if x.shape() != c.shape() {
            return Err(TensorError::shape("mul_const", x, &c));
        }
        let v = x.zip_map(&c, |x, y| x * y);
        self.push("mul_const", v, Op::MulConst(a, Arc::new(c)))
    }

    /// `a − c` for a constant `c`.
    pub fn sub_const(&mut self, a: Var, c: &Tensor) -> Result<Var, TensorError> {
        let x = self.value(a);
        if x.shape() != c.shape() {
            return Err(TensorError::shape("sub_const", x, c));
        }
        let v = x.zip_map(c, |x, y| x - y);
        self.push("sub_const", v, Op::SubConst(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push("relu", v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = self.value(a).map(sigmoid);
        self.push("sigmoid", v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = self.value(a).map(f64::tanh);
        self.push("tanh", v, Op::Tanh(a))
    }

    /// `[a ‖ b]` along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(TensorError::shape("concat_cols", x, y));
        }
        let (ca, cb) = (x.cols(), y.cols());
        let mut data = Vec::with_capacity(x.rows() * (ca + cb));
        for i in 0..x.rows() {
            data.extend_from_slice(x.row(i));
            data.extend_from_slice(y.row(i));
        }
        let v = Tensor::from_vec(x.rows(), ca + cb, data)?;
        self.push("concat_cols", v, Op::ConcatCols(a, b))
    }

    /// Column sums as a 1×c row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let x = self.value(a);
        let mut v = Tensor::zeros(1, x.cols());
        for i in 0..x.rows() {
            for (o, &e) in v.data_mut().iter_mut().zip(x.row(i)) {
                *o += e;
            }
        }
        self.push("sum_rows", v, Op::SumRows(a))
    }

    /// Sum of every entry as a 1×1 tensor.
    pub fn sum_all(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = Tensor::scalar(self.value(a).sum());
        self.push("sum_all", v, Op::SumAll(a))
    }

    /// Column `col` as an n×1 tensor.
    pub fn select_col(&mut self, a: Var, col: usize) -> Result<Var, TensorError> {
        let x = self.value(a);
        if col >= x.cols() {
            return Err(TensorError::IndexOutOfRange {
                index: col,
                len: x.cols(),
            });
        }
        let data = (0..x.rows()).map(|i| x.get(i, col)).collect();
        let v = Tensor::from_vec(x.rows(), 1, data)?;
        self.push("select_col", v, Op::SelectCol(a, col))
    }

    /// Sums rows sharing a segment id; ids must cover `0..S` without gaps.
    pub fn segment_sum(&mut self, a: Var, segment_ids: &[usize]) -> Result<Var, TensorError> {
        let x = self.value(a);
        if segment_ids.len() != x.rows() {
            return Err(TensorError::InvalidLength {
                expected: x.rows(),
                found: segment_ids.len(),
            });
        }
        let n_segments = segment_count(segment_ids)?;
        let c = x.cols();
        let mut v = Tensor::zeros(n_segments, c);
        for (i, &s) in segment_ids.iter().enumerate() {
            let out = &mut v.data_mut()[s * c..(s + 1) * c];
            for (o, &e) in out.iter_mut().zip(x.row(i)) {
                *o += e;
            }
        }
        self.push("segment_sum", v, Op::SegmentSum(a, segment_ids.into()))
    }

    /// `out[dst] += a[src]` for every `(dst, src)` pair; an adjacency-matrix
    /// product without materializing the matrix.
    pub fn neighbor_sum(
        &mut self,
        a: Var,
        pairs: Arc<[(usize, usize)]>,
    ) -> Result<Var, TensorError> {
        let x = self.value(a);
        let n = x.rows();
        let c = x.cols();
        let mut v = Tensor::zeros(n, c);
        for &(dst, src) in pairs.iter() {
            if dst >= n || src >= n {
                return Err(TensorError::IndexOutOfRange {
                    index: dst.max(src),
                    len: n,
                });
            }
            let (s, d) = (src * c, dst * c);
            for k in 0..c {
                let e = x.data()[s + k];
                v.data_mut()[d + k] += e;
            }
        }
        self.push("neighbor_sum", v, Op::NeighborSum(a, pairs))
    }

    /// Reverse sweep from a 1×1 root.
    pub fn backward(&self, root: Var) -> Result<Gradients, TensorError> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(TensorError::NonScalarRoot {
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let acc = |grads: &mut [Option<Tensor>], v: Var, d: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                acc(grads, *a, g.matmul_nt(y));
                acc(grads, *b, x.matmul_tn(g));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|v| -v));
            }
            Op::AddRow(a, row) => {
                acc(grads, *a, g.clone());
                let mut r = Tensor::zeros(1, g.cols());
                for k in 0..g.rows() {
                    for (o, &e) in r.data_mut().iter_mut().zip(g.row(k)) {
                        *o += e;
                    }
                }
                acc(grads, *row, r);
            }
            Op::Hadamard(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                acc(grads, *a, g.zip_map(y, |g, y| g * y));
                acc(grads, *b, g.zip_map(x, |g, x| g * x));
            }
            Op::Scale(a, k) => acc(grads, *a, g.map(|v| v * k)),
            Op::MulConst(a, c) => acc(grads, *a, g.zip_map(c, |g, c| g * c)),
            Op::SubConst(a) => acc(grads, *a, g.clone()),
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(
                    grads,
                    *a,
                    g.zip_map(x, |g, x| if x > 0.0 { g } else { 0.0 }),
                );
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                acc(grads, *a, g.zip_map(y, |g, y| g * y * (1.0 - y)));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                acc(grads, *a, g.zip_map(y, |g, y| g * (1.0 - y * y)));
            }
            Op::ConcatCols(a, b) => {
                let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                let mut ga = Vec::with_capacity(g.rows() * ca);
                let mut gb = Vec::with_capacity(g.rows() * cb);
                for k in 0..g.rows() {
                    let row = g.row(k);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                acc(
                    grads,
                    *a,
                    Tensor::from_vec(g.rows(), ca, ga).expect("shape"),
                );
                acc(
                    grads,
                    *b,
                    Tensor::from_vec(g.rows(), cb, gb).expect("shape"),
                );
            }
            Op::SumRows(a) => {
                let rows = self.value(*a).rows();
                let mut d = Tensor::zeros(rows, g.cols());
                for chunk in d.data_mut().chunks_mut(g.cols().max(1)) {
                    chunk.copy_from_slice(g.data());
                }
                acc(grads, *a, d);
            }
            Op::SumAll(a) => {
                let (r, c) = self.value(*a).shape();
                acc(grads, *a, Tensor::filled(r, c, g.data()[0]));
            }
            Op::SelectCol(a, col) => {
                let (r, c) = self.value(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for k in 0..r {
                    d.set(k, *col, g.get(k, 0));
                }
                acc(grads, *a, d);
            }
            Op::SegmentSum(a, ids) => {
                let c = g.cols();
                let mut d = Tensor::zeros(ids.len(), c);
                for (k, &s) in ids.iter().enumerate() {
                    d.data_mut()[k * c..(k + 1) * c].copy_from_slice(g.row(s));
                }
                acc(grads, *a, d);
            }
            Op::NeighborSum(a, pairs) => {
                let (r, c) = self.value(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for &(dst, src) in pairs.iter() {
                    for k in 0..c {
                        let e = g.data()[dst * c + k];
                        d.data_mut()[src * c + k] += e;
                    }
                }
                acc(grads, *a, d);
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn segment_count(ids: &[usize]) -> Result<usize, TensorError> {
    let Some(&max) = ids.iter().max() else {
        return Ok(0);
    };
    if max >= ids.len() {
        return Err(TensorError::NonContiguousSegments);
    }
    let mut seen = vec![false; max + 1];
    for &s in ids {
        seen[s] = true;
    }
    if seen.iter().all(|&b| b) {
        Ok(max + 1)
    } else {
        Err(TensorError::NonContiguousSegments)
    }
}
