//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so walking them backwards visits each node after all
//! of its consumers. Gradients of a node are the sum of the contributions of
//! every consumer.
//!
//! ```
//! use robust_link::autodiff::Tape;
//! use robust_link::tensor::Tensor;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::column(vec![1.0, 2.0]));
//! let y = tape.square(x).unwrap();
//! let loss = tape.sum(y).unwrap();
//! let grads = tape.backward(loss);
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
//! ```

use std::collections::VecDeque;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::{gemm, SparseAdjacency, Tensor};

/// Lower clamp applied to arguments of `log` and `sqrt`.
pub const CLAMP_MIN: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM {
        adj: Rc<SparseAdjacency>,
        x: Var,
        weights: Option<Var>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Log(Var),
    Sigmoid(Var),
    Clamp(Var, f64, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Elu(Var, f64),
    Square(Var),
    Sqrt(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    RowL2(Var),
    NormalizeRows(Var),
    Softmax(Var),
    SegmentSoftmax(Var, Rc<Vec<usize>>),
    GatherRows(Var, Rc<Vec<usize>>),
    ConcatRows(Var, Var),
    BceWithLogits(Var, Rc<Vec<f64>>),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Recording of one forward evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    detached: Vec<Tensor>,
    replay: VecDeque<Tensor>,
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Accumulated gradient, `None` when no path reaches `v`.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zero-filled when `v` does not influence the output.
    pub fn get_or_zeros(&self, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("shapes already checked")
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

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A tape whose successive [`Tape::detach`] calls return `values` in
    /// order instead of the live values, as long as shapes agree. Used to
    /// hold stop-gradient coefficients fixed across perturbed evaluations.
    pub fn replaying(values: Vec<Tensor>) -> Self {
        Tape {
            replay: values.into(),
            ..Self::default()
        }
    }

    /// Copies the current value of `v` into a gradient-blocking constant.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = match self.replay.pop_front() {
            Some(t) if t.shape() == self.value(v).shape() => t,
            _ => self.value(v).clone(),
        };
        self.detached.push(value.clone());
        self.constant(value)
    }

    /// Values produced by every [`Tape::detach`] so far, in call order.
    pub fn detached_values(&self) -> &[Tensor] {
        &self.detached
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, parents: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let needs_grad = parents.iter().any(|&p| self.needs(p));
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    /// Sparse-dense product; `weights` (n_slots x 1) scales slot-bearing entries.
    pub fn spmm(&mut self, adj: Rc<SparseAdjacency>, x: Var, weights: Option<Var>) -> Result<Var> {
        let w = match weights {
            Some(w) => {
                let t = self.value(w);
                if t.cols() != 1 {
                    return Err(Error::shape("spmm", "edge weights must be a column"));
                }
                Some(t.data())
            }
            None => None,
        };
        let value = adj.apply(self.value(x), w)?;
        let parents: Vec<Var> = std::iter::once(x).chain(weights).collect();
        self.push("spmm", value, Op::SpMM { adj, x, weights }, &parents)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.push("sub", value, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * s);
        self.push("scale", value, Op::Scale(a, s), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x + s);
        self.push("add_scalar", value, Op::AddScalar(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::exp);
        self.push("exp", value, Op::Exp(a), &[a])
    }

    /// Natural log with arguments clamped to at least [`CLAMP_MIN`];
    /// strictly negative arguments are a domain error.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x < 0.0) {
            return Err(Error::Domain("log"));
        }
        let value = self.value(a).map(|x| x.max(CLAMP_MIN).ln());
        self.push("log", value, Op::Log(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(a), &[a])
    }

    /// Clamps into `[lo, hi]`; gradient passes only through unclamped entries.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x.clamp(lo, hi));
        self.push("clamp", value, Op::Clamp(a, lo, hi), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push("relu", value, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push("leaky_relu", value, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn elu(&mut self, a: Var, alpha: f64) -> Result<Var> {
        let value = self
            .value(a)
            .map(|x| if x > 0.0 { x } else { alpha * (x.exp() - 1.0) });
        self.push("elu", value, Op::Elu(a, alpha), &[a])
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x * x);
        self.push("square", value, Op::Square(a), &[a])
    }

    /// Square root with arguments clamped to at least [`CLAMP_MIN`].
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x < 0.0) {
            return Err(Error::Domain("sqrt"));
        }
        let value = self.value(a).map(|x| x.max(CLAMP_MIN).sqrt());
        self.push("sqrt", value, Op::Sqrt(a), &[a])
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).sum());
        self.push("sum", value, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        self.push("mean", value, Op::Mean(a), &[a])
    }

    /// Per-row sums, `n x 1`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::column((0..t.rows()).map(|r| t.row(r).iter().sum()).collect());
        self.push("row_sum", value, Op::RowSum(a), &[a])
    }

    /// Per-row Euclidean norms, `n x 1`.
    pub fn rowwise_l2(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::column((0..t.rows()).map(|r| row_norm(t.row(r))).collect());
        self.push("rowwise_l2", value, Op::RowL2(a), &[a])
    }

    /// Scales every row to unit length.
    pub fn normalize_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let mut value = t.clone();
        for r in 0..t.rows() {
            let n = row_norm(t.row(r));
            for v in value.row_mut(r) {
                *v /= n;
            }
        }
        self.push("normalize_rows", value, Op::NormalizeRows(a), &[a])
    }

    /// Softmax over all entries, treating the tensor as a flat vector.
    pub fn softmax_vector(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::shape("softmax_vector", "empty tensor"));
        }
        let data = softmax(t.data());
        let value = Tensor::from_vec(t.rows(), t.cols(), data)?;
        self.push("softmax_vector", value, Op::Softmax(a), &[a])
    }

    /// Softmax of a column within groups: entry `e` belongs to `segments[e]`.
    pub fn segment_softmax(&mut self, a: Var, segments: Rc<Vec<usize>>) -> Result<Var> {
        let t = self.value(a);
        if t.cols() != 1 || t.rows() != segments.len() {
            return Err(Error::shape(
                "segment_softmax",
                format!("{:?} scores for {} segment ids", t.shape(), segments.len()),
            ));
        }
        let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (&s, &x) in segments.iter().zip(t.data()) {
            max[s] = max[s].max(x);
        }
        let mut out: Vec<f64> = segments
            .iter()
            .zip(t.data())
            .map(|(&s, &x)| (x - max[s]).exp())
            .collect();
        let mut denom = vec![0.0; n_seg];
        for (&s, &e) in segments.iter().zip(&out) {
            denom[s] += e;
        }
        for (o, &s) in out.iter_mut().zip(segments.iter()) {
            *o /= denom[s];
        }
        let value = Tensor::column(out);
        self.push("segment_softmax", value, Op::SegmentSoftmax(a, segments), &[a])
    }

    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var> {
        let value = self.value(a).gather_rows(&idx)?;
        self.push("gather_rows", value, Op::GatherRows(a, idx), &[a])
    }

    /// Stacks `b` below `a`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(Error::shape(
                "concat_rows",
                format!("{:?} over {:?}", ta.shape(), tb.shape()),
            ));
        }
        let mut data = ta.data().to_vec();
        data.extend_from_slice(tb.data());
        let value = Tensor::from_vec(ta.rows() + tb.rows(), ta.cols(), data)?;
        self.push("concat_rows", value, Op::ConcatRows(a, b), &[a, b])
    }

    /// Per-row binary cross-entropy of a logit column against `labels`,
    /// evaluated in the overflow-free form `max(x,0) - x*y + log(1 + e^-|x|)`.
    pub fn bce_with_logits(&mut self, logits: Var, labels: Rc<Vec<f64>>) -> Result<Var> {
        let t = self.value(logits);
        if t.cols() != 1 || t.rows() != labels.len() {
            return Err(Error::shape(
                "bce_with_logits",
                format!("{:?} logits for {} labels", t.shape(), labels.len()),
            ));
        }
        let value = Tensor::column(
            t.data()
                .iter()
                .zip(labels.iter())
                .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
                .collect(),
        );
        self.push("bce_with_logits", value, Op::BceWithLogits(logits, labels), &[logits])
    }

    /// Reverse pass seeded with ones at `output` (the gradient of the sum of
    /// its entries).
    pub fn backward(&self, output: Var) -> Gradients {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        let out = &self.nodes[output.0].value;
        grads[output.0] = Some(Tensor::ones(out.rows(), out.cols()));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                grads[idx] = None;
                continue;
            }
            let g = match &node.op {
                Op::Leaf => continue,
                _ => match grads[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.propagate(idx, &g, &mut grads);
        }
        Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, t: Tensor| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let unary = |a: Var, f: &dyn Fn(f64, f64, f64) -> f64| -> Tensor {
            let x = &self.nodes[a.0].value;
            let data = x
                .data()
                .iter()
                .zip(y.data())
                .zip(g.data())
                .map(|((&xi, &yi), &gi)| f(xi, yi, gi))
                .collect();
            Tensor::from_vec(x.rows(), x.cols(), data).expect("same shape")
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let bv = val(*b);
                    let mut da = Tensor::zeros(val(*a).rows(), val(*a).cols());
                    gemm(g, false, bv, true, &mut da, 0.0);
                    acc(*a, da);
                }
                if self.needs(*b) {
                    let av = val(*a);
                    let mut db = Tensor::zeros(val(*b).rows(), val(*b).cols());
                    gemm(av, true, g, false, &mut db, 0.0);
                    acc(*b, db);
                }
            }
            Op::SpMM { adj, x, weights } => {
                let xv = val(*x);
                let d = xv.cols();
                let wdata = weights.map(|w| val(w).data());
                if self.needs(*x) {
                    let mut dx = Tensor::zeros(xv.rows(), d);
                    let rows = adj.entry_rows();
                    let cols = adj.entry_cols();
                    for e in 0..adj.nnz() {
                        let coef = adj.values()[e] * adj.entry_weight(e, wdata);
                        if coef == 0.0 {
                            continue;
                        }
                        let src = g.row(rows[e]);
                        for (o, s) in dx.row_mut(cols[e]).iter_mut().zip(src) {
                            *o += coef * s;
                        }
                    }
                    acc(*x, dx);
                }
                if let Some(w) = weights {
                    if self.needs(*w) {
                        let mut dw = Tensor::zeros(adj.n_slots(), 1);
                        for e in 0..adj.nnz() {
                            if let Some(s) = adj.slots()[e] {
                                let dot: f64 = g
                                    .row(adj.entry_rows()[e])
                                    .iter()
                                    .zip(xv.row(adj.entry_cols()[e]))
                                    .map(|(a, b)| a * b)
                                    .sum();
                                dw.data_mut()[s] += adj.values()[e] * dot;
                            }
                        }
                        acc(*w, dw);
                    }
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    acc(*a, zip_map(g, val(*b), |gi, bi| gi * bi));
                }
                if self.needs(*b) {
                    acc(*b, zip_map(g, val(*a), |gi, ai| gi * ai));
                }
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| v * s)),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Exp(a) => acc(*a, unary(*a, &|_, y, g| g * y)),
            Op::Log(a) => acc(
                *a,
                unary(*a, &|x, _, g| if x > CLAMP_MIN { g / x } else { 0.0 }),
            ),
            Op::Sigmoid(a) => acc(*a, unary(*a, &|_, y, g| g * y * (1.0 - y))),
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                acc(
                    *a,
                    unary(*a, &|x, _, g| if x >= lo && x <= hi { g } else { 0.0 }),
                )
            }
            Op::Relu(a) => acc(*a, unary(*a, &|x, _, g| if x > 0.0 { g } else { 0.0 })),
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                acc(*a, unary(*a, &|x, _, g| if x > 0.0 { g } else { s * g }))
            }
            Op::Elu(a, alpha) => {
                let al = *alpha;
                acc(
                    *a,
                    unary(*a, &|x, y, g| if x > 0.0 { g } else { g * (y + al) }),
                )
            }
            Op::Square(a) => acc(*a, unary(*a, &|x, _, g| 2.0 * x * g)),
            Op::Sqrt(a) => acc(
                *a,
                unary(*a, &|x, y, g| if x > CLAMP_MIN { 0.5 * g / y } else { 0.0 }),
            ),
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::full(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::full(r, c, g.item() / (r * c) as f64));
            }
            Op::RowSum(a) => {
                let (r, c) = val(*a).shape();
                let mut da = Tensor::zeros(r, c);
                for i in 0..r {
                    da.row_mut(i).fill(g.get(i, 0));
                }
                acc(*a, da);
            }
            Op::RowL2(a) => {
                let xv = val(*a);
                let mut da = xv.clone();
                for i in 0..xv.rows() {
                    let coef = g.get(i, 0) / y.get(i, 0);
                    for v in da.row_mut(i) {
                        *v *= coef;
                    }
                }
                acc(*a, da);
            }
            Op::NormalizeRows(a) => {
                let xv = val(*a);
                let mut da = Tensor::zeros(xv.rows(), xv.cols());
                for i in 0..xv.rows() {
                    let norm = row_norm(xv.row(i));
                    let yr = y.row(i);
                    let gr = g.row(i);
                    let proj: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yi), &gi) in da.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = (gi - proj * yi) / norm;
                    }
                }
                acc(*a, da);
            }
            Op::Softmax(a) => {
                let dot: f64 = g.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
                acc(*a, zip_map(g, y, |gi, yi| yi * (gi - dot)));
            }
            Op::SegmentSoftmax(a, seg) => {
                let n_seg = seg.iter().copied().max().map_or(0, |m| m + 1);
                let mut dots = vec![0.0; n_seg];
                for ((&s, &gi), &yi) in seg.iter().zip(g.data()).zip(y.data()) {
                    dots[s] += gi * yi;
                }
                let data = seg
                    .iter()
                    .zip(g.data())
                    .zip(y.data())
                    .map(|((&s, &gi), &yi)| yi * (gi - dots[s]))
                    .collect();
                acc(*a, Tensor::column(data));
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = val(*a).shape();
                let mut da = Tensor::zeros(r, c);
                for (k, &i) in idx.iter().enumerate() {
                    for (o, s) in da.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += s;
                    }
                }
                acc(*a, da);
            }
            Op::ConcatRows(a, b) => {
                let (ra, c) = val(*a).shape();
                let split = ra * c;
                acc(*a, Tensor::from_vec(ra, c, g.data()[..split].to_vec()).expect("shape"));
                let rb = val(*b).rows();
                acc(*b, Tensor::from_vec(rb, c, g.data()[split..].to_vec()).expect("shape"));
            }
            Op::BceWithLogits(a, labels) => {
                let data = val(*a)
                    .data()
                    .iter()
                    .zip(labels.iter())
                    .zip(g.data())
                    .map(|((&x, &lab), &gi)| gi * (sigmoid(x) - lab))
                    .collect();
                acc(*a, Tensor::column(data));
            }
        }
    }
}

/// Row norm floored at [`CLAMP_MIN`] so that normalisation of a zero row is finite.
#[inline]
pub(crate) fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt().max(CLAMP_MIN)
}

/// Numerically stable softmax of a slice.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}
