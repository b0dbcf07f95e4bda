//! Dense row-major matrices and the sparse adjacency used for message passing.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor({}x{}, {:?})", self.rows, self.cols, self.data)
        } else {
            write!(f, "Tensor({}x{})", self.rows, self.cols)
        }
    }
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 1.0)
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full(1, 1, value)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for a {rows}x{cols} tensor", data.len()),
            ));
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Builds a tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::shape(
                    "from_rows",
                    format!("row {i} has {} entries, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn column(values: Vec<f64>) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn random_uniform<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        low: f64,
        high: f64,
        rng: &mut R,
    ) -> Self {
        let dist = Uniform::new(low, high).expect("low < high");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Tensor { rows, cols, data }
    }

    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Tensor { rows, cols, data }
    }

    /// Glorot/Xavier uniform initialisation.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Self::random_uniform(rows, cols, -limit, limit, rng)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on a {}x{} tensor", self.rows, self.cols);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        gemm(self, false, other, false, &mut out, 0.0);
        Ok(out)
    }

    /// Selects rows by index, in order.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor> {
        let mut out = Tensor::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            if i >= self.rows {
                return Err(Error::Index {
                    context: "gather_rows",
                    index: i,
                    bound: self.rows,
                });
            }
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `out = op(a) * op(b) + beta * out`, where `op` optionally transposes.
pub(crate) fn gemm(a: &Tensor, ta: bool, b: &Tensor, tb: bool, out: &mut Tensor, beta: f64) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    debug_assert_eq!(k, k2);
    debug_assert_eq!(out.shape(), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in out.data.iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if ta { (1, a.cols) } else { (a.cols, 1) };
    let (rsb, csb) = if tb { (1, b.cols) } else { (b.cols, 1) };
    // SAFETY: the strides describe exactly the row-major buffers of `a`, `b`
    // and `out`, whose lengths match the (m, k), (k, n), (m, n) shapes checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa as isize,
            csa as isize,
            b.data.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Sparse `n_rows x n_cols` operator stored as a list of entries.
///
/// Each entry may reference a *slot* in an external weight vector; entries
/// without a slot use an implicit weight of 1. Undirected edges map both of
/// their directed entries to the same slot, so one weight per edge controls
/// both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    slots: Vec<Option<usize>>,
    n_slots: usize,
}

impl SparseAdjacency {
    pub fn new(n_rows: usize, n_cols: usize, n_slots: usize) -> Self {
        SparseAdjacency {
            n_rows,
            n_cols,
            rows: Vec::new(),
            cols: Vec::new(),
            values: Vec::new(),
            slots: Vec::new(),
            n_slots,
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64, slot: Option<usize>) -> Result<()> {
        if row >= self.n_rows {
            return Err(Error::Index {
                context: "sparse adjacency row",
                index: row,
                bound: self.n_rows,
            });
        }
        if col >= self.n_cols {
            return Err(Error::Index {
                context: "sparse adjacency column",
                index: col,
                bound: self.n_cols,
            });
        }
        if let Some(s) = slot {
            if s >= self.n_slots {
                return Err(Error::Index {
                    context: "sparse adjacency weight slot",
                    index: s,
                    bound: self.n_slots,
                });
            }
        }
        self.rows.push(row);
        self.cols.push(col);
        self.values.push(value);
        self.slots.push(slot);
        Ok(())
    }

    /// Symmetric unit-valued adjacency of an undirected edge list; edge `k`
    /// owns weight slot `k`.
    pub fn from_undirected(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = SparseAdjacency::new(n, n, edges.len());
        for (k, &(i, j)) in edges.iter().enumerate() {
            adj.push(i, j, 1.0, Some(k))?;
            if i != j {
                adj.push(j, i, 1.0, Some(k))?;
            }
        }
        Ok(adj)
    }

    /// One-directional entries exactly as listed, no slots.
    pub fn from_entries(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj = SparseAdjacency::new(n_rows, n_cols, 0);
        for &(r, c, v) in entries {
            adj.push(r, c, v, None)?;
        }
        Ok(adj)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn entry_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn entry_cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    /// Dense matrix with weights applied (`None` = all slot weights 1).
    pub fn densify(&self, weights: Option<&[f64]>) -> Tensor {
        let mut out = Tensor::zeros(self.n_rows, self.n_cols);
        for e in 0..self.nnz() {
            let w = self.entry_weight(e, weights);
            let idx = self.rows[e] * self.n_cols + self.cols[e];
            out.data[idx] += self.values[e] * w;
        }
        out
    }

    #[inline]
    pub(crate) fn entry_weight(&self, e: usize, weights: Option<&[f64]>) -> f64 {
        match (weights, self.slots[e]) {
            (Some(w), Some(s)) => w[s],
            _ => 1.0,
        }
    }

    /// `y[r] = sum over entries (r, c) of value * weight * x[c]`.
    pub fn apply(&self, x: &Tensor, weights: Option<&[f64]>) -> Result<Tensor> {
        if x.rows() != self.n_cols {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} adjacency times {}x{}", self.n_rows, self.n_cols, x.rows(), x.cols()),
            ));
        }
        if let Some(w) = weights {
            if w.len() != self.n_slots {
                return Err(Error::shape(
                    "spmm",
                    format!("{} edge weights for {} slots", w.len(), self.n_slots),
                ));
            }
        }
        let d = x.cols();
        let mut out = Tensor::zeros(self.n_rows, d);
        for e in 0..self.nnz() {
            let coef = self.values[e] * self.entry_weight(e, weights);
            if coef == 0.0 {
                continue;
            }
            let (r, c) = (self.rows[e], self.cols[e]);
            let src = &x.data[c * d..(c + 1) * d];
            let dst = &mut out.data[r * d..(r + 1) * d];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += coef * s;
            }
        }
        Ok(out)
    }
}
