//! Reverse-mode differentiation over tensor computations.
//!
//! A [`Tape`] records every primitive applied during a forward pass;
//! [`Tape::backward`] replays the record in reverse, producing
//! gradients for every parameter leaf. One tape is built per training
//! step and dropped afterwards.

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::{self, Scalar, Tensor};

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<F> {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, F),
    AddRowBroadcast(NodeId, NodeId),
    AddColBroadcast(NodeId, NodeId),
    ScaleRows(NodeId, Vec<F>),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    MatMul(NodeId, NodeId),
    MatMulNT(NodeId, NodeId),
    Concat { parts: Vec<NodeId>, axis: usize },
    StackRows { parts: Vec<NodeId> },
    MeanAxis(NodeId, usize),
    MaxOverTime(NodeId, Vec<usize>),
    LogSumExp(NodeId, Option<usize>),
    SumAll(NodeId),
    Gather { src: NodeId, idx: Vec<usize> },
    SelectSum { src: NodeId, idx: Vec<usize> },
    Embedding { table: NodeId, ids: Vec<usize> },
    /// Row `i` of the output is the sum of input rows listed in
    /// `in_rows[i]` (in-neighbor aggregation for one edge type).
    NeighborSum { src: NodeId, in_rows: Vec<Vec<usize>> },
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Records a forward computation and differentiates it.
pub struct Tape<F: Scalar> {
    nodes: Vec<Node<F>>,
    bindings: Vec<(NodeId, String)>,
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bindings: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        id
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A non-differentiable input (data, mask, fixed table).
    pub fn constant(&mut self, value: Tensor<F>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf bound to a named parameter; its gradient is later
    /// accumulated into the store.
    pub fn param(&mut self, store: &ParameterStore<F>, name: &str) -> Result<NodeId> {
        let value = store.get(name)?.clone();
        let id = self.push(value, Op::Leaf, true);
        self.bindings.push((id, name.to_string()));
        Ok(id)
    }

    // -- recorded primitives ------------------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::sub(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::mul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: NodeId, c: F) -> Result<NodeId> {
        let v = tensor::scale(self.value(a), c)?;
        let ng = self.needs(a);
        Ok(self.push(v, Op::Scale(a, c), ng))
    }

    pub fn add_row_broadcast(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let out = tensor::add_row_broadcast(self.value(m), self.value(v))?;
        let ng = self.needs(m) || self.needs(v);
        Ok(self.push(out, Op::AddRowBroadcast(m, v), ng))
    }

    pub fn add_col_broadcast(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let out = tensor::add_col_broadcast(self.value(m), self.value(v))?;
        let ng = self.needs(m) || self.needs(v);
        Ok(self.push(out, Op::AddColBroadcast(m, v), ng))
    }

    pub fn scale_rows(&mut self, m: NodeId, factors: Vec<F>) -> Result<NodeId> {
        let out = tensor::scale_rows(self.value(m), &factors)?;
        let ng = self.needs(m);
        Ok(self.push(out, Op::ScaleRows(m, factors), ng))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::tanh(self.value(a))?;
        let ng = self.needs(a);
        Ok(self.push(v, Op::Tanh(a), ng))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::sigmoid(self.value(a))?;
        let ng = self.needs(a);
        Ok(self.push(v, Op::Sigmoid(a), ng))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::relu(self.value(a))?;
        let ng = self.needs(a);
        Ok(self.push(v, Op::Relu(a), ng))
    }

    /// Matrix-matrix or matrix-vector product.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::MatMul(a, b), ng))
    }

    /// `a * b^T`; the row-wise linear layer.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul_nt(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(v, Op::MatMulNT(a, b), ng))
    }

    /// `W x + b` for a vector `x`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let wx = self.matmul(w, x)?;
        self.add(wx, b)
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        let tensors: Vec<&Tensor<F>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::concat(&tensors, axis)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            v,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            ng,
        ))
    }

    pub fn stack_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor<F>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::stack_rows(&tensors)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            v,
            Op::StackRows {
                parts: parts.to_vec(),
            },
            ng,
        ))
    }

    pub fn mean_axis(&mut self, m: NodeId, axis: usize) -> Result<NodeId> {
        let v = tensor::mean_axis(self.value(m), axis)?;
        let ng = self.needs(m);
        Ok(self.push(v, Op::MeanAxis(m, axis), ng))
    }

    pub fn max_over_time(&mut self, m: NodeId) -> Result<NodeId> {
        let (v, arg) = tensor::max_over_time(self.value(m))?;
        let ng = self.needs(m);
        Ok(self.push(v, Op::MaxOverTime(m, arg), ng))
    }

    pub fn logsumexp(&mut self, x: NodeId, axis: Option<usize>) -> Result<NodeId> {
        let v = tensor::logsumexp(self.value(x), axis)?;
        let ng = self.needs(x);
        Ok(self.push(v, Op::LogSumExp(x, axis), ng))
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let v = tensor::sum_all(self.value(x))?;
        let ng = self.needs(x);
        Ok(self.push(v, Op::SumAll(x), ng))
    }

    pub fn gather(&mut self, src: NodeId, idx: Vec<usize>, out_shape: Vec<usize>) -> Result<NodeId> {
        let v = tensor::gather(self.value(src), &idx, out_shape)?;
        let ng = self.needs(src);
        Ok(self.push(v, Op::Gather { src, idx }, ng))
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, m: NodeId, i: usize) -> Result<NodeId> {
        let t = self.value(m);
        if t.rank() != 2 || i >= t.rows() {
            return Err(Error::shape("row", format!("row {i} of {:?}", t.shape())));
        }
        let c = t.cols();
        let idx: Vec<usize> = (i * c..(i + 1) * c).collect();
        self.gather(m, idx, vec![c])
    }

    pub fn select_sum(&mut self, src: NodeId, idx: Vec<usize>) -> Result<NodeId> {
        let v = tensor::select_sum(self.value(src), &idx)?;
        let ng = self.needs(src);
        Ok(self.push(v, Op::SelectSum { src, idx }, ng))
    }

    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let v = tensor::embedding_lookup(self.value(table), ids)?;
        let ng = self.needs(table);
        Ok(self.push(
            v,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            ng,
        ))
    }

    /// Inverted dropout by explicit mask.
    pub fn dropout(&mut self, x: NodeId, mask: Tensor<F>) -> Result<NodeId> {
        let m = self.constant(mask);
        self.mul(x, m)
    }

    /// Per-row in-neighbor sum: `out[i] = sum over j in in_rows[i] of src[j]`.
    pub fn neighbor_sum(&mut self, src: NodeId, in_rows: Vec<Vec<usize>>) -> Result<NodeId> {
        let t = self.value(src);
        if t.rank() != 2 || in_rows.len() != t.rows() {
            return Err(Error::shape(
                "neighbor_sum",
                format!("{} rows for {:?}", in_rows.len(), t.shape()),
            ));
        }
        let (r, c) = (t.rows(), t.cols());
        if let Some(&bad) = in_rows.iter().flatten().find(|&&j| j >= r) {
            return Err(Error::Contract(format!(
                "neighbor_sum row {bad} out of bounds for {r} nodes"
            )));
        }
        let mut data = vec![F::zero(); r * c];
        for (i, srcs) in in_rows.iter().enumerate() {
            for &j in srcs {
                for k in 0..c {
                    data[i * c + k] += t.data()[j * c + k];
                }
            }
        }
        let v = Tensor::from_op("neighbor_sum", vec![r, c], data)?;
        let ng = self.needs(src);
        Ok(self.push(v, Op::NeighborSum { src, in_rows }, ng))
    }

    // -- backward -----------------------------------------------------------

    fn add_grad(&mut self, id: NodeId, delta: Tensor<F>) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => {
                for (gv, dv) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gv += *dv;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    /// Propagates gradients from a scalar `loss` node back to every
    /// parameter leaf. Erases any previous backward result.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward from non-scalar loss of shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].needs_grad {
            return Ok(()); // loss does not depend on any parameter
        }
        self.grads[loss.0] = Some(Tensor::scalar(F::one()));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.step_back(i, &g)?;
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Gradient of a node after [`Tape::backward`]; `None` when the
    /// loss does not depend on it.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor<F>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Adds leaf gradients into the store. Parameters the computation
    /// never touched keep their (zero) accumulators.
    pub fn accumulate_param_grads(&self, store: &mut ParameterStore<F>) -> Result<()> {
        for (id, name) in &self.bindings {
            if let Some(g) = self.grad(*id) {
                store.accumulate_grad(name, g)?;
            }
        }
        Ok(())
    }

    fn step_back(&mut self, i: usize, g: &Tensor<F>) -> Result<()> {
        // Helper closures cannot borrow self mutably while reading
        // values, so gradients are built as plain buffers first.
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.add_grad(a, g.clone());
                self.add_grad(b, g.clone());
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                self.add_grad(a, g.clone());
                let neg = tensor::scale(g, -F::one())?;
                self.add_grad(b, neg);
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let da = tensor::mul(g, self.value(b))?;
                let db = tensor::mul(g, self.value(a))?;
                self.add_grad(a, da);
                self.add_grad(b, db);
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                let da = tensor::scale(g, c)?;
                self.add_grad(a, da);
            }
            Op::AddRowBroadcast(m, v) => {
                let (m, v) = (*m, *v);
                let cols = self.value(v).numel();
                let mut dv = vec![F::zero(); cols];
                for (k, &gv) in g.data().iter().enumerate() {
                    dv[k % cols] += gv;
                }
                self.add_grad(m, g.clone());
                self.add_grad(v, Tensor::from_op("add_row_broadcast_back", vec![cols], dv)?);
            }
            Op::AddColBroadcast(m, v) => {
                let (m, v) = (*m, *v);
                let rows = self.value(v).numel();
                let cols = g.numel() / rows;
                let mut dv = vec![F::zero(); rows];
                for (k, &gv) in g.data().iter().enumerate() {
                    dv[k / cols] += gv;
                }
                self.add_grad(m, g.clone());
                self.add_grad(v, Tensor::from_op("add_col_broadcast_back", vec![rows], dv)?);
            }
            Op::ScaleRows(m, factors) => {
                let m = *m;
                let f = factors.clone();
                let dm = tensor::scale_rows(g, &f)?;
                self.add_grad(m, dm);
            }
            Op::Tanh(a) => {
                let a = *a;
                let y = &self.nodes[i].value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * (F::one() - yv * yv))
                    .collect();
                let da = Tensor::from_op("tanh_back", g.shape().to_vec(), data)?;
                self.add_grad(a, da);
            }
            Op::Sigmoid(a) => {
                let a = *a;
                let y = &self.nodes[i].value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * yv * (F::one() - yv))
                    .collect();
                let da = Tensor::from_op("sigmoid_back", g.shape().to_vec(), data)?;
                self.add_grad(a, da);
            }
            Op::Relu(a) => {
                let a = *a;
                let x = self.value(a);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gv, &xv)| if xv > F::zero() { gv } else { F::zero() })
                    .collect();
                let da = Tensor::from_op("relu_back", g.shape().to_vec(), data)?;
                self.add_grad(a, da);
            }
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                let av = self.value(a);
                let bv = self.value(b);
                if bv.rank() == 2 {
                    // dA = g * B^T ; dB = A^T * g
                    let da = tensor::matmul_nt(g, bv)?;
                    let db = mat_tn(av, g)?;
                    self.add_grad(a, da);
                    self.add_grad(b, db);
                } else {
                    // W x: dW = g (outer) x ; dx = W^T g
                    let (m, n) = (av.rows(), av.cols());
                    let mut dw = vec![F::zero(); m * n];
                    for r in 0..m {
                        for c in 0..n {
                            dw[r * n + c] = g.data()[r] * bv.data()[c];
                        }
                    }
                    let mut dx = vec![F::zero(); n];
                    for r in 0..m {
                        let gr = g.data()[r];
                        for c in 0..n {
                            dx[c] += av.data()[r * n + c] * gr;
                        }
                    }
                    self.add_grad(a, Tensor::from_op("matvec_back_w", vec![m, n], dw)?);
                    self.add_grad(b, Tensor::from_op("matvec_back_x", vec![n], dx)?);
                }
            }
            Op::MatMulNT(a, b) => {
                // out = A B^T : dA = g * B ; dB = g^T * A
                let (a, b) = (*a, *b);
                let da = tensor::matmul(g, self.value(b))?;
                let db = mat_tn(g, self.value(a))?;
                self.add_grad(a, da);
                self.add_grad(b, db);
            }
            Op::Concat { parts, axis } => {
                let parts = parts.clone();
                let axis = *axis;
                if g.rank() == 1 || axis == 0 {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(p).numel();
                        let slice = g.data()[offset..offset + n].to_vec();
                        let shape = self.value(p).shape().to_vec();
                        offset += n;
                        self.add_grad(p, Tensor::from_op("concat_back", shape, slice)?);
                    }
                } else {
                    let rows = g.rows();
                    let gcols = g.cols();
                    let mut col_offset = 0;
                    for p in parts {
                        let pc = self.value(p).cols();
                        let mut dp = Vec::with_capacity(rows * pc);
                        for r in 0..rows {
                            let start = r * gcols + col_offset;
                            dp.extend_from_slice(&g.data()[start..start + pc]);
                        }
                        col_offset += pc;
                        self.add_grad(p, Tensor::from_op("concat_back", vec![rows, pc], dp)?);
                    }
                }
            }
            Op::StackRows { parts } => {
                let parts = parts.clone();
                let cols = g.cols();
                for (r, p) in parts.into_iter().enumerate() {
                    let slice = g.data()[r * cols..(r + 1) * cols].to_vec();
                    self.add_grad(p, Tensor::from_op("stack_back", vec![cols], slice)?);
                }
            }
            Op::MeanAxis(m, axis) => {
                let (m, axis) = (*m, *axis);
                let shape = self.value(m).shape().to_vec();
                let (r, c) = (shape[0], shape[1]);
                let mut dm = vec![F::zero(); r * c];
                if axis == 0 {
                    let inv = F::one() / F::from_f64(r as f64);
                    for i in 0..r {
                        for j in 0..c {
                            dm[i * c + j] = g.data()[j] * inv;
                        }
                    }
                } else {
                    let inv = F::one() / F::from_f64(c as f64);
                    for i in 0..r {
                        for j in 0..c {
                            dm[i * c + j] = g.data()[i] * inv;
                        }
                    }
                }
                self.add_grad(m, Tensor::from_op("mean_back", shape, dm)?);
            }
            Op::MaxOverTime(m, arg) => {
                let m = *m;
                let arg = arg.clone();
                let shape = self.value(m).shape().to_vec();
                let c = shape[1];
                let mut dm = vec![F::zero(); shape[0] * c];
                for (j, &i) in arg.iter().enumerate() {
                    dm[i * c + j] += g.data()[j];
                }
                self.add_grad(m, Tensor::from_op("max_over_time_back", shape, dm)?);
            }
            Op::LogSumExp(x, axis) => {
                let (x, axis) = (*x, *axis);
                let xv = self.value(x);
                let y = &self.nodes[i].value;
                let shape = xv.shape().to_vec();
                let mut dx = vec![F::zero(); xv.numel()];
                match axis {
                    None => {
                        let yv = y.data()[0];
                        let gv = g.data()[0];
                        for (k, &v) in xv.data().iter().enumerate() {
                            dx[k] = gv * (v - yv).exp();
                        }
                    }
                    Some(0) => {
                        let (r, c) = (shape[0], shape[1]);
                        for ii in 0..r {
                            for j in 0..c {
                                dx[ii * c + j] = g.data()[j] * (xv.at2(ii, j) - y.data()[j]).exp();
                            }
                        }
                    }
                    Some(_) => {
                        let (r, c) = (shape[0], shape[1]);
                        for ii in 0..r {
                            for j in 0..c {
                                dx[ii * c + j] = g.data()[ii] * (xv.at2(ii, j) - y.data()[ii]).exp();
                            }
                        }
                    }
                }
                self.add_grad(x, Tensor::from_op("logsumexp_back", shape, dx)?);
            }
            Op::SumAll(x) => {
                let x = *x;
                let shape = self.value(x).shape().to_vec();
                let gv = g.data()[0];
                let dx = vec![gv; shape.iter().product()];
                self.add_grad(x, Tensor::from_op("sum_back", shape, dx)?);
            }
            Op::Gather { src, idx } => {
                let src = *src;
                let idx = idx.clone();
                let shape = self.value(src).shape().to_vec();
                let mut dsrc = vec![F::zero(); shape.iter().product()];
                for (k, &si) in idx.iter().enumerate() {
                    dsrc[si] += g.data()[k];
                }
                self.add_grad(src, Tensor::from_op("gather_back", shape, dsrc)?);
            }
            Op::SelectSum { src, idx } => {
                let src = *src;
                let idx = idx.clone();
                let shape = self.value(src).shape().to_vec();
                let gv = g.data()[0];
                let mut dsrc = vec![F::zero(); shape.iter().product()];
                for &si in &idx {
                    dsrc[si] += gv;
                }
                self.add_grad(src, Tensor::from_op("select_sum_back", shape, dsrc)?);
            }
            Op::Embedding { table, ids } => {
                let table = *table;
                let ids = ids.clone();
                let shape = self.value(table).shape().to_vec();
                let d = shape[1];
                let mut dt = vec![F::zero(); shape[0] * d];
                for (r, &id) in ids.iter().enumerate() {
                    for k in 0..d {
                        dt[id * d + k] += g.data()[r * d + k];
                    }
                }
                self.add_grad(table, Tensor::from_op("embedding_back", shape, dt)?);
            }
            Op::NeighborSum { src, in_rows } => {
                let src = *src;
                let in_rows = in_rows.clone();
                let shape = self.value(src).shape().to_vec();
                let c = shape[1];
                let mut dsrc = vec![F::zero(); shape[0] * c];
                for (i_row, srcs) in in_rows.iter().enumerate() {
                    for &j in srcs {
                        for k in 0..c {
                            dsrc[j * c + k] += g.data()[i_row * c + k];
                        }
                    }
                }
                self.add_grad(src, Tensor::from_op("neighbor_sum_back", shape, dsrc)?);
            }
        }
        Ok(())
    }
}

/// `a^T * b` for (m,n)^T x (m,p) -> (n,p).
fn mat_tn<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let (m, n) = (a.rows(), a.cols());
    let p = b.cols();
    debug_assert_eq!(m, b.rows());
    let mut out = vec![F::zero(); n * p];
    for k in 0..m {
        for i in 0..n {
            let aki = a.data()[k * n + i];
            for j in 0..p {
                out[i * p + j] += aki * b.data()[k * p + j];
            }
        }
    }
    Tensor::from_op("mat_tn", vec![n, p], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(pairs: &[(&str, Tensor<f64>)]) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        for (n, t) in pairs {
            s.register(n, t.clone()).unwrap();
        }
        s
    }

    #[test]
    fn identity_computation_has_gradient_one() {
        let store = store_with(&[("theta", Tensor::scalar(3.0))]);
        let mut tape = Tape::new();
        let th = tape.param(&store, "theta").unwrap();
        tape.backward(th).unwrap();
        assert_eq!(tape.grad(th).unwrap().data(), &[1.0]);
    }

    #[test]
    fn sum_of_tanh_at_zero_has_unit_gradients() {
        let store = store_with(&[("v", Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap())]);
        let mut tape = Tape::new();
        let v = tape.param(&store, "v").unwrap();
        let t = tape.tanh(v).unwrap();
        let loss = tape.sum_all(t).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(v).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let store = store_with(&[("v", Tensor::vector(vec![1.0, 2.0]).unwrap())]);
        let mut tape = Tape::new();
        let v = tape.param(&store, "v").unwrap();
        assert!(tape.backward(v).is_err());
    }

    #[test]
    fn untouched_parameters_keep_zero_gradient() {
        let mut store = store_with(&[
            ("used", Tensor::scalar(2.0)),
            ("unused", Tensor::scalar(5.0)),
        ]);
        let mut tape = Tape::new();
        let u = tape.param(&store, "used").unwrap();
        let loss = tape.mul(u, u).unwrap();
        tape.backward(loss).unwrap();
        tape.accumulate_param_grads(&mut store).unwrap();
        assert_eq!(store.grad("used").unwrap().data(), &[4.0]);
        assert_eq!(store.grad("unused").unwrap().data(), &[0.0]);
    }

    #[test]
    fn matvec_gradients_match_hand_derivation() {
        // loss = sum(W x), dW = 1 x^T, dx = W^T 1
        let w = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let store = store_with(&[("w", w)]);
        let mut tape = Tape::new();
        let wn = tape.param(&store, "w").unwrap();
        let x = tape.constant(Tensor::vector(vec![5.0, 7.0]).unwrap());
        let y = tape.matmul(wn, x).unwrap();
        let loss = tape.sum_all(y).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(wn).unwrap().data(), &[5.0, 7.0, 5.0, 7.0]);
    }

    #[test]
    fn fanout_accumulates() {
        // loss = x*x + x -> grad 2x + 1
        let store = store_with(&[("x", Tensor::scalar(3.0))]);
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.add(sq, x).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[7.0]);
    }
}
