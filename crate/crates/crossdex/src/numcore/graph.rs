use super::Tensor;

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Matmul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// k * x + c, elementwise; only k matters going backward.
    Affine(NodeId, f64),
    /// Broadcast-add a row vector to every row of a matrix.
    AddRowVec(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Square(NodeId),
    Softplus(NodeId),
    Slice {
        src: NodeId,
        start: usize,
    },
    SliceCols {
        src: NodeId,
        start: usize,
    },
    SliceRows {
        src: NodeId,
        start: usize,
    },
    Concat(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    Conv1d {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    Sum(NodeId),
    Mean(NodeId),
    RowSums(NodeId),
    RowMeans(NodeId),
    Transpose(NodeId),
    RepeatRows(NodeId),
    RepeatCols(NodeId),
    Flatten(NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Reverse-mode tape. Operations append nodes recording their inputs;
/// [`Graph::backward`] walks the tape in reverse and accumulates
/// gradients for every node.
///
/// Shape mismatches panic with a message naming both shapes: graphs are
/// built by model code, so a mismatch is a bug, not a runtime condition.
/// The graph is acyclic by construction: an op can only reference nodes
/// that already exist.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, indexed by [`NodeId`].
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &Tensor {
        &self.grads[id.0]
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts a leaf node (parameter or constant input).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(
            ta.rank() == 2 && tb.rank() == 2 && ta.cols() == tb.rows(),
            "matmul: incompatible shapes {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        let (da, db) = (ta.data(), tb.data());
        for i in 0..m {
            for l in 0..k {
                let av = da[i * k + l];
                if av == 0.0 {
                    continue;
                }
                let brow = &db[l * n..(l + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += av * brow[j];
                }
            }
        }
        self.push(Tensor::from_vec(vec![m, n], out), Op::Matmul(a, b))
    }

    fn elementwise_pair(&self, a: NodeId, b: NodeId, what: &str) {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "{what}: shape mismatch {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.elementwise_pair(a, b, "add");
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::from_vec(shape, data), Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.elementwise_pair(a, b, "sub");
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::from_vec(shape, data), Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.elementwise_pair(a, b, "mul");
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::from_vec(shape, data), Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        self.affine(a, k, 0.0)
    }

    /// Elementwise `k * x + c`.
    pub fn affine(&mut self, a: NodeId, k: f64, c: f64) -> NodeId {
        let t = self.value(a);
        let data = t.data().iter().map(|x| k * x + c).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_vec(shape, data), Op::Affine(a, k))
    }

    /// Adds row vector `v` to every row of matrix `a`.
    pub fn add_rowvec(&mut self, a: NodeId, v: NodeId) -> NodeId {
        let (ta, tv) = (self.value(a), self.value(v));
        assert!(
            ta.rank() == 2 && tv.rank() == 1 && ta.cols() == tv.len(),
            "add_rowvec: shape mismatch {:?} vs {:?}",
            ta.shape(),
            tv.shape()
        );
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = ta.data().to_vec();
        let vd = tv.data();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += vd[j];
            }
        }
        self.push(Tensor::from_vec(vec![m, n], data), Op::AddRowVec(a, v))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let shape = t.shape().to_vec();
        self.push(Tensor::from_vec(shape, data), op)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// `ln(1 + e^x)`, the smooth positivity reparameterization.
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, softplus, Op::Softplus(a))
    }

    /// Contiguous slice of a rank-1 tensor.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let t = self.value(a);
        assert!(
            t.rank() == 1 && start + len <= t.len(),
            "slice: [{start}, {start}+{len}) out of {:?}",
            t.shape()
        );
        let data = t.data()[start..start + len].to_vec();
        self.push(Tensor::vector(data), Op::Slice { src: a, start })
    }

    /// Contiguous column block of a rank-2 tensor.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let t = self.value(a);
        assert!(
            t.rank() == 2 && start + len <= t.cols(),
            "slice_cols: [{start}, {start}+{len}) out of {:?}",
            t.shape()
        );
        let (m, n) = (t.rows(), t.cols());
        let mut data = Vec::with_capacity(m * len);
        for i in 0..m {
            data.extend_from_slice(&t.data()[i * n + start..i * n + start + len]);
        }
        self.push(
            Tensor::from_vec(vec![m, len], data),
            Op::SliceCols { src: a, start },
        )
    }

    /// Contiguous row block of a rank-2 tensor.
    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let t = self.value(a);
        assert!(
            t.rank() == 2 && start + len <= t.rows(),
            "slice_rows: [{start}, {start}+{len}) out of {:?}",
            t.shape()
        );
        let n = t.cols();
        let data = t.data()[start * n..(start + len) * n].to_vec();
        self.push(
            Tensor::from_vec(vec![len, n], data),
            Op::SliceRows { src: a, start },
        )
    }

    /// Concatenates rank-1 tensors into one vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat: no inputs");
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            assert!(
                t.rank() == 1,
                "concat: rank-1 required, got {:?}",
                t.shape()
            );
            data.extend_from_slice(t.data());
        }
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    /// Horizontally stacks rank-2 tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let m = self.value(parts[0]).rows();
        let total: usize = parts
            .iter()
            .map(|&p| {
                let t = self.value(p);
                assert!(
                    t.rank() == 2 && t.rows() == m,
                    "concat_cols: shape mismatch {:?} vs {} rows",
                    t.shape(),
                    m
                );
                t.cols()
            })
            .sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for &p in parts {
                let t = self.value(p);
                let n = t.cols();
                data.extend_from_slice(&t.data()[i * n..(i + 1) * n]);
            }
        }
        self.push(
            Tensor::from_vec(vec![m, total], data),
            Op::ConcatCols(parts.to_vec()),
        )
    }

    /// Stacks rank-1 tensors of equal length as matrix rows.
    pub fn stack_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "stack_rows: no inputs");
        let n = self.value(parts[0]).len();
        let mut data = Vec::with_capacity(parts.len() * n);
        for &p in parts {
            let t = self.value(p);
            assert!(
                t.rank() == 1 && t.len() == n,
                "stack_rows: shape mismatch {:?} vs length {}",
                t.shape(),
                n
            );
            data.extend_from_slice(t.data());
        }
        self.push(
            Tensor::from_vec(vec![parts.len(), n], data),
            Op::StackRows(parts.to_vec()),
        )
    }

    /// 1-D convolution, stride 1, valid padding.
    ///
    /// `input` is `[C_in, L]`, `weight` is `[C_out, C_in, K]`, `bias` is
    /// `[C_out]`; the output is `[C_out, L - K + 1]`.
    pub fn conv1d(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> NodeId {
        let (ti, tw, tb) = (self.value(input), self.value(weight), self.value(bias));
        assert!(
            ti.rank() == 2 && tw.rank() == 3,
            "conv1d: need [C_in, L] input and [C_out, C_in, K] weight, got {:?} and {:?}",
            ti.shape(),
            tw.shape()
        );
        let (c_in, len) = (ti.shape()[0], ti.shape()[1]);
        let (c_out, w_cin, k) = (tw.shape()[0], tw.shape()[1], tw.shape()[2]);
        assert!(
            w_cin == c_in && tb.shape() == [c_out],
            "conv1d: channel mismatch: input {:?}, weight {:?}, bias {:?}",
            ti.shape(),
            tw.shape(),
            tb.shape()
        );
        assert!(
            len >= k,
            "conv1d: input length {} shorter than kernel {}",
            len,
            k
        );
        let out_len = len - k + 1;
        let (xd, wd, bd) = (ti.data(), tw.data(), tb.data());
        let mut out = vec![0.0; c_out * out_len];
        for o in 0..c_out {
            for t in 0..out_len {
                let mut acc = bd[o];
                for ci in 0..c_in {
                    let xrow = &xd[ci * len + t..ci * len + t + k];
                    let wrow = &wd[(o * c_in + ci) * k..(o * c_in + ci + 1) * k];
                    for j in 0..k {
                        acc += wrow[j] * xrow[j];
                    }
                }
                out[o * out_len + t] = acc;
            }
        }
        self.push(
            Tensor::from_vec(vec![c_out, out_len], out),
            Op::Conv1d {
                input,
                weight,
                bias,
            },
        )
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Mean of all elements, as a scalar node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let s: f64 = t.data().iter().sum();
        let n = t.len() as f64;
        self.push(Tensor::scalar(s / n), Op::Mean(a))
    }

    /// Per-row sums of a rank-2 tensor: `[m, n] -> [m]`.
    pub fn row_sums(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        assert!(
            t.rank() == 2,
            "row_sums: rank-2 required, got {:?}",
            t.shape()
        );
        let (m, n) = (t.rows(), t.cols());
        let data = (0..m)
            .map(|i| t.data()[i * n..(i + 1) * n].iter().sum())
            .collect();
        self.push(Tensor::vector(data), Op::RowSums(a))
    }

    /// Per-row means of a rank-2 tensor: `[m, n] -> [m]`.
    pub fn row_means(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        assert!(
            t.rank() == 2,
            "row_means: rank-2 required, got {:?}",
            t.shape()
        );
        let (m, n) = (t.rows(), t.cols());
        let data = (0..m)
            .map(|i| t.data()[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
            .collect();
        self.push(Tensor::vector(data), Op::RowMeans(a))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        assert!(
            t.rank() == 2,
            "transpose: rank-2 required, got {:?}",
            t.shape()
        );
        let (m, n) = (t.rows(), t.cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = t.at(i, j);
            }
        }
        self.push(Tensor::from_vec(vec![n, m], data), Op::Transpose(a))
    }

    /// Tiles a rank-1 tensor as `rows` identical matrix rows.
    pub fn repeat_rows(&mut self, v: NodeId, rows: usize) -> NodeId {
        let t = self.value(v);
        assert!(
            t.rank() == 1,
            "repeat_rows: rank-1 required, got {:?}",
            t.shape()
        );
        let n = t.len();
        let mut data = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            data.extend_from_slice(t.data());
        }
        self.push(Tensor::from_vec(vec![rows, n], data), Op::RepeatRows(v))
    }

    /// Tiles a rank-1 tensor as `cols` identical matrix columns.
    pub fn repeat_cols(&mut self, v: NodeId, cols: usize) -> NodeId {
        let t = self.value(v);
        assert!(
            t.rank() == 1,
            "repeat_cols: rank-1 required, got {:?}",
            t.shape()
        );
        let m = t.len();
        let mut data = Vec::with_capacity(m * cols);
        for i in 0..m {
            for _ in 0..cols {
                data.push(t.data()[i]);
            }
        }
        self.push(Tensor::from_vec(vec![m, cols], data), Op::RepeatCols(v))
    }

    /// Flattens any tensor to rank 1 (row-major order).
    pub fn flatten(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().to_vec();
        self.push(Tensor::vector(data), Op::Flatten(a))
    }

    /// Mean squared error between two same-shape nodes, as a scalar node.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> NodeId {
        let d = self.sub(pred, target);
        let sq = self.square(d);
        self.mean(sq)
    }

    /// Reverse pass from a scalar loss node. Panics if `loss` is not
    /// scalar. Returns gradients for every node on the tape.
    pub fn backward(&mut self, loss: NodeId) -> Gradients {
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.value(loss).shape()
        );
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape().to_vec()))
            .collect();
        grads[loss.0].data_mut()[0] = 1.0;

        for idx in (0..=loss.0).rev() {
            // Split off the current gradient so inputs can be mutated.
            let g = std::mem::replace(&mut grads[idx], Tensor::zeros(vec![0]));
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let (m, n) = (g.rows(), g.cols());
                    let k = self.nodes[a.0].value.cols();
                    let ad = self.nodes[a.0].value.data();
                    let bd = self.nodes[b.0].value.data();
                    let gd = g.data();
                    {
                        let da = grads[a.0].data_mut();
                        for i in 0..m {
                            for l in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += gd[i * n + j] * bd[l * n + j];
                                }
                                da[i * k + l] += acc;
                            }
                        }
                    }
                    let db = grads[b.0].data_mut();
                    for l in 0..k {
                        for i in 0..m {
                            let av = ad[i * k + l];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[l * n + j] += av * gd[i * n + j];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(grads[a.0].data_mut(), g.data(), 1.0);
                    accumulate(grads[b.0].data_mut(), g.data(), 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(grads[a.0].data_mut(), g.data(), 1.0);
                    accumulate(grads[b.0].data_mut(), g.data(), -1.0);
                }
                Op::Mul(a, b) => {
                    let bd: Vec<f64> = self.nodes[b.0].value.data().to_vec();
                    let ad: Vec<f64> = self.nodes[a.0].value.data().to_vec();
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[a.0].data_mut()[i] += gv * bd[i];
                    }
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[b.0].data_mut()[i] += gv * ad[i];
                    }
                }
                Op::Affine(a, k) => {
                    accumulate(grads[a.0].data_mut(), g.data(), *k);
                }
                Op::AddRowVec(a, v) => {
                    let n = self.nodes[v.0].value.len();
                    let m = g.rows();
                    accumulate(grads[a.0].data_mut(), g.data(), 1.0);
                    let dv = grads[v.0].data_mut();
                    for i in 0..m {
                        for j in 0..n {
                            dv[j] += g.data()[i * n + j];
                        }
                    }
                }
                Op::Tanh(a) => {
                    let y = self.nodes[idx].value.data();
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[a.0].data_mut()[i] += gv * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = self.nodes[idx].value.data();
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[a.0].data_mut()[i] += gv * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Relu(a) => {
                    let x = self.nodes[a.0].value.data().to_vec();
                    for (i, gv) in g.data().iter().enumerate() {
                        if x[i] > 0.0 {
                            grads[a.0].data_mut()[i] += gv;
                        }
                    }
                }
                Op::Exp(a) => {
                    let y = self.nodes[idx].value.data();
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[a.0].data_mut()[i] += gv * y[i];
                    }
                }
                Op::Square(a) => {
                    let x = self.nodes[a.0].value.data().to_vec();
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[a.0].data_mut()[i] += gv * 2.0 * x[i];
                    }
                }
                Op::Softplus(a) => {
                    let x = self.nodes[a.0].value.data().to_vec();
                    for (i, gv) in g.data().iter().enumerate() {
                        grads[a.0].data_mut()[i] += gv * sigmoid(x[i]);
                    }
                }
                Op::Slice { src, start } => {
                    let da = grads[src.0].data_mut();
                    for (i, gv) in g.data().iter().enumerate() {
                        da[start + i] += gv;
                    }
                }
                Op::SliceCols { src, start } => {
                    let n = self.nodes[src.0].value.cols();
                    let len = g.cols();
                    let da = grads[src.0].data_mut();
                    for i in 0..g.rows() {
                        for j in 0..len {
                            da[i * n + start + j] += g.data()[i * len + j];
                        }
                    }
                }
                Op::SliceRows { src, start } => {
                    let n = g.cols();
                    let da = grads[src.0].data_mut();
                    for i in 0..g.rows() {
                        for j in 0..n {
                            da[(start + i) * n + j] += g.data()[i * n + j];
                        }
                    }
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        accumulate(grads[p.0].data_mut(), &g.data()[off..off + len], 1.0);
                        off += len;
                    }
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let m = g.rows();
                    let total = g.cols();
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.cols();
                        let dp = grads[p.0].data_mut();
                        for i in 0..m {
                            for j in 0..n {
                                dp[i * n + j] += g.data()[i * total + off + j];
                            }
                        }
                        off += n;
                    }
                }
                Op::StackRows(parts) => {
                    let parts = parts.clone();
                    let n = g.cols();
                    for (i, p) in parts.into_iter().enumerate() {
                        accumulate(grads[p.0].data_mut(), &g.data()[i * n..(i + 1) * n], 1.0);
                    }
                }
                Op::Conv1d {
                    input,
                    weight,
                    bias,
                } => {
                    let (input, weight, bias) = (*input, *weight, *bias);
                    let ti = &self.nodes[input.0].value;
                    let tw = &self.nodes[weight.0].value;
                    let (c_in, len) = (ti.shape()[0], ti.shape()[1]);
                    let (c_out, k) = (tw.shape()[0], tw.shape()[2]);
                    let out_len = len - k + 1;
                    let xd = ti.data().to_vec();
                    let wd = tw.data().to_vec();
                    let gd = g.data();
                    {
                        let dx = grads[input.0].data_mut();
                        for o in 0..c_out {
                            for t in 0..out_len {
                                let gv = gd[o * out_len + t];
                                if gv == 0.0 {
                                    continue;
                                }
                                for ci in 0..c_in {
                                    for j in 0..k {
                                        dx[ci * len + t + j] += gv * wd[(o * c_in + ci) * k + j];
                                    }
                                }
                            }
                        }
                    }
                    {
                        let dw = grads[weight.0].data_mut();
                        for o in 0..c_out {
                            for t in 0..out_len {
                                let gv = gd[o * out_len + t];
                                if gv == 0.0 {
                                    continue;
                                }
                                for ci in 0..c_in {
                                    for j in 0..k {
                                        dw[(o * c_in + ci) * k + j] += gv * xd[ci * len + t + j];
                                    }
                                }
                            }
                        }
                    }
                    let db = grads[bias.0].data_mut();
                    for o in 0..c_out {
                        for t in 0..out_len {
                            db[o] += gd[o * out_len + t];
                        }
                    }
                }
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    for v in grads[a.0].data_mut() {
                        *v += gv;
                    }
                }
                Op::Mean(a) => {
                    let n = self.nodes[a.0].value.len() as f64;
                    let gv = g.data()[0] / n;
                    for v in grads[a.0].data_mut() {
                        *v += gv;
                    }
                }
                Op::RowSums(a) => {
                    let n = self.nodes[a.0].value.cols();
                    let da = grads[a.0].data_mut();
                    for (i, gv) in g.data().iter().enumerate() {
                        for j in 0..n {
                            da[i * n + j] += gv;
                        }
                    }
                }
                Op::RowMeans(a) => {
                    let n = self.nodes[a.0].value.cols();
                    let da = grads[a.0].data_mut();
                    for (i, gv) in g.data().iter().enumerate() {
                        for j in 0..n {
                            da[i * n + j] += gv / n as f64;
                        }
                    }
                }
                Op::Transpose(a) => {
                    let (n, m) = (g.rows(), g.cols());
                    let da = grads[a.0].data_mut();
                    for i in 0..n {
                        for j in 0..m {
                            da[j * n + i] += g.data()[i * m + j];
                        }
                    }
                }
                Op::RepeatRows(v) => {
                    let n = self.nodes[v.0].value.len();
                    let dv = grads[v.0].data_mut();
                    for i in 0..g.rows() {
                        for j in 0..n {
                            dv[j] += g.data()[i * n + j];
                        }
                    }
                }
                Op::RepeatCols(v) => {
                    let cols = g.cols();
                    let dv = grads[v.0].data_mut();
                    for i in 0..g.rows() {
                        for j in 0..cols {
                            dv[i] += g.data()[i * cols + j];
                        }
                    }
                }
                Op::Flatten(a) => {
                    accumulate(grads[a.0].data_mut(), g.data(), 1.0);
                }
            }
            grads[idx] = g;
        }
        Gradients { grads }
    }
}

fn accumulate(dst: &mut [f64], src: &[f64], k: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})");
        }
    }

    #[test]
    fn matmul_identity_passes_vector_through() {
        let mut g = Graph::new();
        let eye = g.leaf(Tensor::matrix(
            3,
            3,
            vec![1., 0., 0., 0., 1., 0., 0., 0., 1.],
        ));
        let v = g.leaf(Tensor::matrix(3, 1, vec![2.0, -1.0, 5.0]));
        let out = g.matmul(eye, v);
        assert_eq!(g.value(out).data(), &[2.0, -1.0, 5.0]);
    }

    #[test]
    fn activation_fixed_points() {
        let mut g = Graph::new();
        let z = g.leaf(Tensor::vector(vec![0.0]));
        let t = g.tanh(z);
        let s = g.sigmoid(z);
        assert_eq!(g.value(t).data()[0], 0.0);
        assert_eq!(g.value(s).data()[0], 0.5);
    }

    #[test]
    fn conv1d_hand_example() {
        // [1,2,3,4] * [1,1,1] valid -> [6, 9]
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(1, 4, vec![1., 2., 3., 4.]));
        let w = g.leaf(Tensor::from_vec(vec![1, 1, 3], vec![1., 1., 1.]));
        let b = g.leaf(Tensor::vector(vec![0.0]));
        let y = g.conv1d(x, w, b);
        assert_eq!(g.value(y).shape(), &[1, 2]);
        assert_eq!(g.value(y).data(), &[6.0, 9.0]);
    }

    #[test]
    fn backward_of_square_is_two_x() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.square(x);
        let grads = g.backward(y);
        assert_eq!(grads.get(x).data()[0], 6.0);
    }

    #[test]
    fn backward_sum_tanh_at_zero_is_ones() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.0; 5]));
        let t = g.tanh(x);
        let s = g.sum(t);
        let grads = g.backward(s);
        vec_close(grads.get(x).data(), &[1.0; 5], 0.0);
    }

    #[test]
    #[should_panic(expected = "matmul: incompatible shapes")]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::matrix(2, 3, vec![0.0; 6]));
        let b = g.leaf(Tensor::matrix(2, 2, vec![0.0; 4]));
        g.matmul(a, b);
    }

    #[test]
    #[should_panic(expected = "backward requires a scalar loss")]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0]));
        g.backward(x);
    }

    /// Central-difference check of every differentiable op, 100 seeds
    /// each. The op output is reduced to a scalar through
    /// mean(square(..)) so gradients are non-trivial everywhere.
    #[test]
    fn every_op_matches_finite_differences_over_100_seeds() {
        use rand::{Rng, SeedableRng};

        type Build = Box<dyn Fn(&mut Graph, &[NodeId]) -> NodeId>;
        let cases: Vec<(&str, Vec<Vec<usize>>, Build)> = vec![
            (
                "matmul",
                vec![vec![3, 4], vec![4, 2]],
                Box::new(|g, l| g.matmul(l[0], l[1])),
            ),
            (
                "add",
                vec![vec![2, 3], vec![2, 3]],
                Box::new(|g, l| g.add(l[0], l[1])),
            ),
            (
                "sub",
                vec![vec![2, 3], vec![2, 3]],
                Box::new(|g, l| g.sub(l[0], l[1])),
            ),
            (
                "mul",
                vec![vec![2, 3], vec![2, 3]],
                Box::new(|g, l| g.mul(l[0], l[1])),
            ),
            (
                "affine",
                vec![vec![5]],
                Box::new(|g, l| g.affine(l[0], -1.7, 0.4)),
            ),
            (
                "add_rowvec",
                vec![vec![3, 4], vec![4]],
                Box::new(|g, l| g.add_rowvec(l[0], l[1])),
            ),
            ("tanh", vec![vec![6]], Box::new(|g, l| g.tanh(l[0]))),
            ("sigmoid", vec![vec![6]], Box::new(|g, l| g.sigmoid(l[0]))),
            ("relu", vec![vec![6]], Box::new(|g, l| g.relu(l[0]))),
            ("exp", vec![vec![6]], Box::new(|g, l| g.exp(l[0]))),
            ("square", vec![vec![6]], Box::new(|g, l| g.square(l[0]))),
            ("softplus", vec![vec![6]], Box::new(|g, l| g.softplus(l[0]))),
            ("slice", vec![vec![8]], Box::new(|g, l| g.slice(l[0], 2, 4))),
            (
                "slice_cols",
                vec![vec![3, 6]],
                Box::new(|g, l| g.slice_cols(l[0], 1, 3)),
            ),
            (
                "slice_rows",
                vec![vec![5, 3]],
                Box::new(|g, l| g.slice_rows(l[0], 1, 2)),
            ),
            (
                "concat",
                vec![vec![3], vec![4]],
                Box::new(|g, l| g.concat(&[l[0], l[1]])),
            ),
            (
                "concat_cols",
                vec![vec![2, 3], vec![2, 2]],
                Box::new(|g, l| g.concat_cols(&[l[0], l[1]])),
            ),
            (
                "stack_rows",
                vec![vec![4], vec![4], vec![4]],
                Box::new(|g, l| g.stack_rows(&[l[0], l[1], l[2]])),
            ),
            (
                "conv1d",
                vec![vec![2, 7], vec![3, 2, 3], vec![3]],
                Box::new(|g, l| g.conv1d(l[0], l[1], l[2])),
            ),
            ("sum", vec![vec![2, 3]], Box::new(|g, l| g.sum(l[0]))),
            ("mean", vec![vec![2, 3]], Box::new(|g, l| g.mean(l[0]))),
            (
                "row_sums",
                vec![vec![3, 4]],
                Box::new(|g, l| g.row_sums(l[0])),
            ),
            (
                "row_means",
                vec![vec![3, 4]],
                Box::new(|g, l| g.row_means(l[0])),
            ),
            (
                "transpose",
                vec![vec![3, 4]],
                Box::new(|g, l| g.transpose(l[0])),
            ),
            (
                "repeat_rows",
                vec![vec![4]],
                Box::new(|g, l| g.repeat_rows(l[0], 3)),
            ),
            (
                "repeat_cols",
                vec![vec![4]],
                Box::new(|g, l| g.repeat_cols(l[0], 3)),
            ),
            (
                "flatten",
                vec![vec![2, 3]],
                Box::new(|g, l| g.flatten(l[0])),
            ),
        ];

        let loss_of = |build: &Build, tensors: &[Tensor]| -> f64 {
            let mut g = Graph::new();
            let leaves: Vec<NodeId> = tensors.iter().map(|t| g.leaf(t.clone())).collect();
            let out = build(&mut g, &leaves);
            let sq = g.square(out);
            let loss = g.mean(sq);
            g.value(loss).item()
        };

        for (name, shapes, build) in &cases {
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0x09_5eed + name.len() as u64);
            for seed in 0..100 {
                let _ = seed;
                let tensors: Vec<Tensor> = shapes
                    .iter()
                    .map(|s| {
                        let n: usize = s.iter().product();
                        Tensor::from_vec(
                            s.clone(),
                            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        )
                    })
                    .collect();

                let mut g = Graph::new();
                let leaves: Vec<NodeId> = tensors.iter().map(|t| g.leaf(t.clone())).collect();
                let out = build(&mut g, &leaves);
                let sq = g.square(out);
                let loss = g.mean(sq);
                let grads = g.backward(loss);

                let h = 1e-5;
                for (ti, t) in tensors.iter().enumerate() {
                    for k in 0..t.len() {
                        let analytic = grads.get(leaves[ti]).data()[k];
                        let mut up = tensors.clone();
                        up[ti].data_mut()[k] += h;
                        let mut dn = tensors.clone();
                        dn[ti].data_mut()[k] -= h;
                        let fd = (loss_of(build, &up) - loss_of(build, &dn)) / (2.0 * h);
                        let tol = 1e-6 + 1e-4 * fd.abs().max(analytic.abs());
                        assert!(
                            (fd - analytic).abs() <= tol,
                            "{name} leaf {ti}[{k}]: fd {fd} vs analytic {analytic}"
                        );
                    }
                }
            }
        }
    }

    /// Central-difference check of one composed expression covering most ops.
    #[test]
    fn composed_expression_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let forward = |p: &[f64]| -> f64 {
            let mut g = Graph::new();
            let w = g.leaf(Tensor::matrix(3, 2, p[..6].to_vec()));
            let x = g.leaf(Tensor::matrix(2, 3, p[6..12].to_vec()));
            let b = g.leaf(Tensor::vector(p[12..14].to_vec()));
            let h = g.matmul(x, w);
            let h = g.add_rowvec(h, b);
            let t = g.tanh(h);
            let s = g.sigmoid(h);
            let m = g.mul(t, s);
            let sp = g.softplus(m);
            let e = g.exp(sp);
            let sq = g.square(e);
            let rm = g.row_means(sq);
            let rs = g.row_sums(sq);
            let v = g.concat(&[rm, rs]);
            let v = g.affine(v, 0.25, 0.1);
            let out = g.mean(v);
            g.value(out).item()
        };

        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p: Vec<f64> = (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut g = Graph::new();
            let w = g.leaf(Tensor::matrix(3, 2, p[..6].to_vec()));
            let x = g.leaf(Tensor::matrix(2, 3, p[6..12].to_vec()));
            let b = g.leaf(Tensor::vector(p[12..14].to_vec()));
            let h0 = g.matmul(x, w);
            let h = g.add_rowvec(h0, b);
            let t = g.tanh(h);
            let s = g.sigmoid(h);
            let m = g.mul(t, s);
            let sp = g.softplus(m);
            let e = g.exp(sp);
            let sq = g.square(e);
            let rm = g.row_means(sq);
            let rs = g.row_sums(sq);
            let v0 = g.concat(&[rm, rs]);
            let v = g.affine(v0, 0.25, 0.1);
            let out = g.mean(v);
            let grads = g.backward(out);
            let analytic: Vec<f64> = grads
                .get(w)
                .data()
                .iter()
                .chain(grads.get(x).data())
                .chain(grads.get(b).data())
                .copied()
                .collect();

            let h_step = 1e-5;
            for i in 0..p.len() {
                let mut pp = p.clone();
                pp[i] += h_step;
                let up = forward(&pp);
                pp[i] -= 2.0 * h_step;
                let dn = forward(&pp);
                let fd = (up - dn) / (2.0 * h_step);
                let tol = 1e-6 + 1e-4 * fd.abs().max(analytic[i].abs());
                assert!(
                    (fd - analytic[i]).abs() <= tol,
                    "coord {i}: fd {fd} vs analytic {}",
                    analytic[i]
                );
            }
        }
    }
}
