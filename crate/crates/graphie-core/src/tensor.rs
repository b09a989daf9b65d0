//! Dense row-major tensors and the differentiable primitive set.
//!
//! Everything here is pure: identical inputs give bit-identical outputs.
//! Randomness (dropout masks, initialization) always arrives from the
//! caller. Values are checked for NaN/Inf at construction; a non-finite
//! value anywhere is an error, never silently propagated.

use crate::error::{Error, Result};

/// Element type for all numeric work. `f32` is the default precision
/// for training and inference; `f64` is the verification mode used by
/// gradient checks.
pub trait Scalar:
    num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::ops::AddAssign
    + std::ops::SubAssign
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense tensor with row-major storage. Rank 0 is a scalar, rank 1 a
/// vector, rank 2 a matrix; nothing here needs more.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    /// Builds a tensor, validating the shape/data contract and
    /// rejecting non-finite values.
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("zero dimension in {shape:?}")));
        }
        if data.len() != numel {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} wants {numel} values, got {}", data.len()),
            ));
        }
        let t = Tensor { shape, data };
        t.check_finite("tensor")?;
        Ok(t)
    }

    /// Internal constructor for op outputs; still scans for NaN/Inf so
    /// overflow cannot slip through an operator.
    pub(crate) fn from_op(op: &'static str, shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let t = Tensor { shape, data };
        t.check_finite(op)?;
        Ok(t)
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<F>) -> Result<Self> {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![F::zero(); numel],
        }
    }

    pub fn full(shape: Vec<usize>, v: F) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![v; numel],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Value of a rank-0 tensor.
    pub fn item(&self) -> Result<F> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )))
        }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at2(&self, i: usize, j: usize) -> F {
        self.data[i * self.shape[1] + j]
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context.to_string()));
        }
        Ok(())
    }

    /// Elementwise cast between precisions.
    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::from_f64(v.as_f64())).collect(),
        }
    }

    fn map(&self, op: &'static str, f: impl Fn(F) -> F) -> Result<Tensor<F>> {
        Tensor::from_op(op, self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }
}

fn same_shape<F: Scalar>(op: &'static str, a: &Tensor<F>, b: &Tensor<F>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Elementwise and linear primitives
// ---------------------------------------------------------------------------

pub fn add<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    same_shape("add", a, b)?;
    Tensor::from_op(
        "add",
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect(),
    )
}

pub fn sub<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    same_shape("sub", a, b)?;
    Tensor::from_op(
        "sub",
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| x - y).collect(),
    )
}

pub fn mul<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    same_shape("mul", a, b)?;
    Tensor::from_op(
        "mul",
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect(),
    )
}

pub fn scale<F: Scalar>(x: &Tensor<F>, c: F) -> Result<Tensor<F>> {
    x.map("scale", |v| v * c)
}

pub fn tanh<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    x.map("tanh", |v| v.tanh())
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    x.map("sigmoid", sigmoid_one)
}

pub(crate) fn sigmoid_one<F: Scalar>(v: F) -> F {
    if v >= F::zero() {
        F::one() / (F::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (F::one() + e)
    }
}

pub fn relu<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    x.map("relu", |v| if v > F::zero() { v } else { F::zero() })
}

/// Matrix product. Accepts (m,n)x(n,p) -> (m,p) and (m,n)x(n) -> (m).
pub fn matmul<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    match (a.rank(), b.rank()) {
        (2, 2) => {
            let (m, n) = (a.rows(), a.cols());
            let (n2, p) = (b.rows(), b.cols());
            if n != n2 {
                return Err(Error::shape(
                    "matmul",
                    format!("{:?} x {:?}", a.shape(), b.shape()),
                ));
            }
            let mut out = vec![F::zero(); m * p];
            for i in 0..m {
                for k in 0..n {
                    let aik = a.data()[i * n + k];
                    let brow = &b.data()[k * p..(k + 1) * p];
                    let orow = &mut out[i * p..(i + 1) * p];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += aik * bv;
                    }
                }
            }
            Tensor::from_op("matmul", vec![m, p], out)
        }
        (2, 1) => {
            let (m, n) = (a.rows(), a.cols());
            if n != b.numel() {
                return Err(Error::shape(
                    "matmul",
                    format!("{:?} x {:?}", a.shape(), b.shape()),
                ));
            }
            let mut out = vec![F::zero(); m];
            for i in 0..m {
                let mut acc = F::zero();
                for k in 0..n {
                    acc += a.data()[i * n + k] * b.data()[k];
                }
                out[i] = acc;
            }
            Tensor::from_op("matmul", vec![m], out)
        }
        _ => Err(Error::shape(
            "matmul",
            format!("ranks {:?} x {:?}", a.shape(), b.shape()),
        )),
    }
}

/// `a * b^T` for row-wise linear layers: (k,n) x (m,n) -> (k,m).
pub fn matmul_nt<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    if a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols() {
        return Err(Error::shape(
            "matmul_nt",
            format!("{:?} x {:?}^T", a.shape(), b.shape()),
        ));
    }
    let (k, n) = (a.rows(), a.cols());
    let m = b.rows();
    let mut out = vec![F::zero(); k * m];
    for i in 0..k {
        for j in 0..m {
            let mut acc = F::zero();
            for t in 0..n {
                acc += a.data()[i * n + t] * b.data()[j * n + t];
            }
            out[i * m + j] = acc;
        }
    }
    Tensor::from_op("matmul_nt", vec![k, m], out)
}

/// `W x + b` with `W` (m,n), `x` (n), `b` (m).
pub fn affine<F: Scalar>(w: &Tensor<F>, x: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    if w.rank() != 2 || x.rank() != 1 || b.rank() != 1 || w.cols() != x.numel() || w.rows() != b.numel()
    {
        return Err(Error::shape(
            "affine",
            format!("W {:?}, x {:?}, b {:?}", w.shape(), x.shape(), b.shape()),
        ));
    }
    let wx = matmul(w, x)?;
    add(&wx, b)
}

/// Adds a vector to every row of a matrix.
pub fn add_row_broadcast<F: Scalar>(m: &Tensor<F>, v: &Tensor<F>) -> Result<Tensor<F>> {
    if m.rank() != 2 || v.rank() != 1 || m.cols() != v.numel() {
        return Err(Error::shape(
            "add_row_broadcast",
            format!("{:?} + {:?}", m.shape(), v.shape()),
        ));
    }
    let cols = m.cols();
    let mut out = m.data().to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        *o += v.data()[i % cols];
    }
    Tensor::from_op("add_row_broadcast", m.shape().to_vec(), out)
}

/// Adds `v[i]` to every element of row `i`.
pub fn add_col_broadcast<F: Scalar>(m: &Tensor<F>, v: &Tensor<F>) -> Result<Tensor<F>> {
    if m.rank() != 2 || v.rank() != 1 || m.rows() != v.numel() {
        return Err(Error::shape(
            "add_col_broadcast",
            format!("{:?} + {:?}", m.shape(), v.shape()),
        ));
    }
    let cols = m.cols();
    let mut out = m.data().to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        *o += v.data()[i / cols];
    }
    Tensor::from_op("add_col_broadcast", m.shape().to_vec(), out)
}

/// Multiplies row `i` by the constant factor `f[i]`.
pub fn scale_rows<F: Scalar>(m: &Tensor<F>, f: &[F]) -> Result<Tensor<F>> {
    if m.rank() != 2 || m.rows() != f.len() {
        return Err(Error::shape(
            "scale_rows",
            format!("{:?} with {} factors", m.shape(), f.len()),
        ));
    }
    let cols = m.cols();
    let mut out = m.data().to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        *o = *o * f[i / cols];
    }
    Tensor::from_op("scale_rows", m.shape().to_vec(), out)
}

// ---------------------------------------------------------------------------
// Structural primitives
// ---------------------------------------------------------------------------

/// Concatenates tensors along `axis`. Vectors concat along axis 0;
/// matrices along axis 0 (rows) or 1 (columns).
pub fn concat<F: Scalar>(parts: &[&Tensor<F>], axis: usize) -> Result<Tensor<F>> {
    if parts.is_empty() {
        return Err(Error::Contract("concat of zero tensors".into()));
    }
    let rank = parts[0].rank();
    if parts.iter().any(|p| p.rank() != rank) || axis >= rank.max(1) || rank == 0 || rank > 2 {
        return Err(Error::shape(
            "concat",
            format!(
                "axis {axis} over shapes {:?}",
                parts.iter().map(|p| p.shape().to_vec()).collect::<Vec<_>>()
            ),
        ));
    }
    if rank == 1 {
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(p.data());
        }
        let n = data.len();
        return Tensor::from_op("concat", vec![n], data);
    }
    // rank 2
    let fixed = 1 - axis;
    let fixed_dim = parts[0].shape()[fixed];
    if parts.iter().any(|p| p.shape()[fixed] != fixed_dim) {
        return Err(Error::shape(
            "concat",
            format!(
                "axis {axis} over shapes {:?}",
                parts.iter().map(|p| p.shape().to_vec()).collect::<Vec<_>>()
            ),
        ));
    }
    if axis == 0 {
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            data.extend_from_slice(p.data());
            rows += p.rows();
        }
        Tensor::from_op("concat", vec![rows, fixed_dim], data)
    } else {
        let total_cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(fixed_dim * total_cols);
        for r in 0..fixed_dim {
            for p in parts {
                let c = p.cols();
                data.extend_from_slice(&p.data()[r * c..(r + 1) * c]);
            }
        }
        Tensor::from_op("concat", vec![fixed_dim, total_cols], data)
    }
}

/// Stacks equal-length vectors into a matrix, one row per vector.
pub fn stack_rows<F: Scalar>(rows: &[&Tensor<F>]) -> Result<Tensor<F>> {
    if rows.is_empty() {
        return Err(Error::Contract("stack_rows of zero vectors".into()));
    }
    let n = rows[0].numel();
    if rows.iter().any(|r| r.rank() != 1 || r.numel() != n) {
        return Err(Error::shape(
            "stack_rows",
            format!("{:?}", rows.iter().map(|r| r.shape().to_vec()).collect::<Vec<_>>()),
        ));
    }
    let mut data = Vec::with_capacity(rows.len() * n);
    for r in rows {
        data.extend_from_slice(r.data());
    }
    Tensor::from_op("stack_rows", vec![rows.len(), n], data)
}

/// Mean over one axis of a matrix: axis 0 averages rows into a vector
/// of column means; axis 1 averages columns into row means.
pub fn mean_axis<F: Scalar>(m: &Tensor<F>, axis: usize) -> Result<Tensor<F>> {
    if m.rank() != 2 || axis > 1 {
        return Err(Error::shape(
            "mean_axis",
            format!("axis {axis} of {:?}", m.shape()),
        ));
    }
    let (r, c) = (m.rows(), m.cols());
    if axis == 0 {
        let inv = F::one() / F::from_f64(r as f64);
        let mut out = vec![F::zero(); c];
        for i in 0..r {
            for j in 0..c {
                out[j] += m.at2(i, j);
            }
        }
        for o in &mut out {
            *o = *o * inv;
        }
        Tensor::from_op("mean_axis", vec![c], out)
    } else {
        let inv = F::one() / F::from_f64(c as f64);
        let mut out = vec![F::zero(); r];
        for i in 0..r {
            for j in 0..c {
                out[i] += m.at2(i, j);
            }
        }
        for o in &mut out {
            *o = *o * inv;
        }
        Tensor::from_op("mean_axis", vec![r], out)
    }
}

/// Column-wise max over the rows of a (time, features) matrix.
/// Returns the pooled vector and the winning row per column (first
/// maximal row on ties).
pub fn max_over_time<F: Scalar>(m: &Tensor<F>) -> Result<(Tensor<F>, Vec<usize>)> {
    if m.rank() != 2 {
        return Err(Error::shape(
            "max_over_time",
            format!("{:?}", m.shape()),
        ));
    }
    let (r, c) = (m.rows(), m.cols());
    let mut out = vec![F::zero(); c];
    let mut arg = vec![0usize; c];
    for j in 0..c {
        let mut best = m.at2(0, j);
        let mut bi = 0;
        for i in 1..r {
            let v = m.at2(i, j);
            if v > best {
                best = v;
                bi = i;
            }
        }
        out[j] = best;
        arg[j] = bi;
    }
    Ok((Tensor::from_op("max_over_time", vec![c], out)?, arg))
}

fn lse_slice<F: Scalar>(xs: impl Iterator<Item = F> + Clone) -> F {
    let mut mx = F::neg_infinity();
    for v in xs.clone() {
        if v > mx {
            mx = v;
        }
    }
    let mut acc = F::zero();
    for v in xs {
        acc += (v - mx).exp();
    }
    mx + acc.ln()
}

/// Log-sum-exp reduction. `axis = None` reduces everything to a
/// scalar; for matrices, `Some(0)` reduces over rows (per-column
/// result) and `Some(1)` over columns.
pub fn logsumexp<F: Scalar>(x: &Tensor<F>, axis: Option<usize>) -> Result<Tensor<F>> {
    match axis {
        None => {
            let v = lse_slice(x.data().iter().copied());
            Tensor::from_op("logsumexp", vec![], vec![v])
        }
        Some(a) => {
            if x.rank() != 2 || a > 1 {
                return Err(Error::shape(
                    "logsumexp",
                    format!("axis {a} of {:?}", x.shape()),
                ));
            }
            let (r, c) = (x.rows(), x.cols());
            if a == 0 {
                let mut out = Vec::with_capacity(c);
                for j in 0..c {
                    out.push(lse_slice((0..r).map(|i| x.at2(i, j))));
                }
                Tensor::from_op("logsumexp", vec![c], out)
            } else {
                let mut out = Vec::with_capacity(r);
                for i in 0..r {
                    out.push(lse_slice((0..c).map(|j| x.at2(i, j))));
                }
                Tensor::from_op("logsumexp", vec![r], out)
            }
        }
    }
}

pub fn sum_all<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let mut acc = F::zero();
    for &v in x.data() {
        acc += v;
    }
    Tensor::from_op("sum_all", vec![], vec![acc])
}

/// Gathers flat indices of `src` into a tensor of `out_shape`.
pub fn gather<F: Scalar>(src: &Tensor<F>, idx: &[usize], out_shape: Vec<usize>) -> Result<Tensor<F>> {
    let numel: usize = out_shape.iter().product();
    if numel != idx.len() {
        return Err(Error::shape(
            "gather",
            format!("{} indices into shape {out_shape:?}", idx.len()),
        ));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= src.numel()) {
        return Err(Error::Contract(format!(
            "gather index {bad} out of bounds for {} elements",
            src.numel()
        )));
    }
    let data = idx.iter().map(|&i| src.data()[i]).collect();
    Tensor::from_op("gather", out_shape, data)
}

/// Sum of the selected flat entries (duplicates allowed).
pub fn select_sum<F: Scalar>(src: &Tensor<F>, idx: &[usize]) -> Result<Tensor<F>> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= src.numel()) {
        return Err(Error::Contract(format!(
            "select_sum index {bad} out of bounds for {} elements",
            src.numel()
        )));
    }
    let mut acc = F::zero();
    for &i in idx {
        acc += src.data()[i];
    }
    Tensor::from_op("select_sum", vec![], vec![acc])
}

/// Rows of an embedding table selected by id: (V,d) with k ids -> (k,d).
pub fn embedding_lookup<F: Scalar>(table: &Tensor<F>, ids: &[usize]) -> Result<Tensor<F>> {
    if table.rank() != 2 {
        return Err(Error::shape(
            "embedding_lookup",
            format!("table {:?}", table.shape()),
        ));
    }
    if ids.is_empty() {
        return Err(Error::Contract("embedding_lookup with no ids".into()));
    }
    let (v, d) = (table.rows(), table.cols());
    if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
        return Err(Error::Contract(format!(
            "embedding id {bad} out of vocabulary ({v} rows)"
        )));
    }
    let mut data = Vec::with_capacity(ids.len() * d);
    for &i in ids {
        data.extend_from_slice(&table.data()[i * d..(i + 1) * d]);
    }
    Tensor::from_op("embedding_lookup", vec![ids.len(), d], data)
}

/// Inverted dropout: elementwise product with an externally supplied
/// mask whose entries are 0 or 1/(1-p).
pub fn dropout<F: Scalar>(x: &Tensor<F>, mask: &Tensor<F>) -> Result<Tensor<F>> {
    same_shape("dropout", x, mask)?;
    mul(x, mask)
}

// ---------------------------------------------------------------------------
// Public primitive dispatcher
// ---------------------------------------------------------------------------

/// The differentiable primitive set, addressable by kind.
#[derive(Clone, Debug)]
pub enum PrimitiveKind {
    /// Inputs `[w, x, b]`.
    Affine,
    /// Inputs `[a, b]`.
    MatMul,
    Tanh,
    Sigmoid,
    Relu,
    Add,
    Mul,
    Concat { axis: usize },
    MeanOverAxis { axis: usize },
    MaxOverTime,
    /// `axis: None` reduces to a scalar.
    LogSumExp { axis: Option<usize> },
    /// Inputs `[x, mask]`; the mask is an explicit inverted-dropout mask.
    Dropout,
    /// Inputs `[table]`.
    EmbeddingLookup { ids: Vec<usize> },
}

fn arity<F: Scalar>(op: &'static str, inputs: &[&Tensor<F>], n: usize) -> Result<()> {
    if inputs.len() != n {
        return Err(Error::Contract(format!(
            "{op} expects {n} inputs, got {}",
            inputs.len()
        )));
    }
    Ok(())
}

/// Evaluates one primitive. Deterministic given inputs; dropout takes
/// an explicit mask, never internal randomness.
pub fn primitive_forward<F: Scalar>(kind: &PrimitiveKind, inputs: &[&Tensor<F>]) -> Result<Tensor<F>> {
    match kind {
        PrimitiveKind::Affine => {
            arity("affine", inputs, 3)?;
            affine(inputs[0], inputs[1], inputs[2])
        }
        PrimitiveKind::MatMul => {
            arity("matmul", inputs, 2)?;
            matmul(inputs[0], inputs[1])
        }
        PrimitiveKind::Tanh => {
            arity("tanh", inputs, 1)?;
            tanh(inputs[0])
        }
        PrimitiveKind::Sigmoid => {
            arity("sigmoid", inputs, 1)?;
            sigmoid(inputs[0])
        }
        PrimitiveKind::Relu => {
            arity("relu", inputs, 1)?;
            relu(inputs[0])
        }
        PrimitiveKind::Add => {
            arity("add", inputs, 2)?;
            add(inputs[0], inputs[1])
        }
        PrimitiveKind::Mul => {
            arity("mul", inputs, 2)?;
            mul(inputs[0], inputs[1])
        }
        PrimitiveKind::Concat { axis } => concat(inputs, *axis),
        PrimitiveKind::MeanOverAxis { axis } => {
            arity("mean_axis", inputs, 1)?;
            mean_axis(inputs[0], *axis)
        }
        PrimitiveKind::MaxOverTime => {
            arity("max_over_time", inputs, 1)?;
            Ok(max_over_time(inputs[0])?.0)
        }
        PrimitiveKind::LogSumExp { axis } => {
            arity("logsumexp", inputs, 1)?;
            logsumexp(inputs[0], *axis)
        }
        PrimitiveKind::Dropout => {
            arity("dropout", inputs, 2)?;
            dropout(inputs[0], inputs[1])
        }
        PrimitiveKind::EmbeddingLookup { ids } => {
            arity("embedding_lookup", inputs, 1)?;
            embedding_lookup(inputs[0], ids)
        }
    }
}
