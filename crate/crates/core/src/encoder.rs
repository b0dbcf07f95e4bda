//! GCN, GAT and GraphSAGE encoders with dot-product / Hadamard edge readouts.
//!
//! Every layer follows the message / combine split:
//!
//! | arch | message + aggregate                         | combine                          |
//! |------|---------------------------------------------|----------------------------------|
//! | GCN  | `W Σ_j (d̂_i d̂_j)^-1/2 h_j`                  | `σ(m_i + W d̂_i^-1 h_i)`          |
//! | GAT  | `Σ_j α_ij W h_j`                             | `σ(m_i + α_ii W h_i)`            |
//! | SAGE | `W |N(i)|^-1 Σ_j h_j`                        | `σ(m_i + W h_i)`                 |
//!
//! with `d̂_i = deg(i) + 1` (or `1 + Σ_j w_ij` under soft edge weights). Self-loops are never part of `N(i)`; the self
//! term is a separate entry of the propagation operator. The last layer is
//! linear.

use std::collections::HashSet;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{canonical, Edge};
use crate::tensor::{SparseAdjacency, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Gat,
    Sage,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "gat" => Ok(Arch::Gat),
            "sage" => Ok(Arch::Sage),
            other => Err(Error::config(
                "arch",
                format!("unknown architecture `{other}`, expected one of gcn, gat, sage"),
            )),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::Gat => "gat",
            Arch::Sage => "sage",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Elu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub activation: Activation,
    /// Negative slope of the LeakyReLU attention scorer (GAT only).
    pub attention_slope: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            arch: Arch::Gcn,
            layers: 2,
            hidden: 128,
            activation: Activation::Relu,
            attention_slope: 0.2,
        }
    }
}

impl EncoderConfig {
    pub fn new(arch: Arch, layers: usize, hidden: usize) -> Self {
        EncoderConfig {
            arch,
            layers,
            hidden,
            ..Default::default()
        }
    }
}

/// Learnable weights of an `L`-layer encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub weights: Vec<Tensor>,
    /// GAT attention vectors applied to the receiving node, one per layer.
    pub attn_self: Vec<Tensor>,
    /// GAT attention vectors applied to the sending neighbour, one per layer.
    pub attn_nbr: Vec<Tensor>,
}

impl ModelParams {
    /// Glorot-initialised parameters; every layer has width `cfg.hidden`.
    pub fn init<R: Rng + ?Sized>(cfg: &EncoderConfig, in_dim: usize, rng: &mut R) -> Result<Self> {
        if cfg.layers == 0 {
            return Err(Error::config("layers", "need at least one layer"));
        }
        if cfg.hidden == 0 || in_dim == 0 {
            return Err(Error::config("hidden", "dimensions must be positive"));
        }
        let mut weights = Vec::with_capacity(cfg.layers);
        let mut attn_self = Vec::new();
        let mut attn_nbr = Vec::new();
        let mut d_in = in_dim;
        for _ in 0..cfg.layers {
            weights.push(Tensor::glorot(d_in, cfg.hidden, rng));
            if cfg.arch == Arch::Gat {
                attn_self.push(Tensor::glorot(cfg.hidden, 1, rng));
                attn_nbr.push(Tensor::glorot(cfg.hidden, 1, rng));
            }
            d_in = cfg.hidden;
        }
        Ok(ModelParams {
            config: cfg.clone(),
            weights,
            attn_self,
            attn_nbr,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.last().map_or(0, Tensor::cols)
    }

    /// All parameter tensors in a fixed order (weights, then attention).
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights
            .iter()
            .chain(&self.attn_self)
            .chain(&self.attn_nbr)
            .collect()
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .chain(self.attn_self.iter_mut())
            .chain(self.attn_nbr.iter_mut())
            .collect()
    }

    /// Puts the parameters on `tape`, differentiable when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let mut put = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        BoundParams {
            weights: self.weights.iter().map(&mut put).collect(),
            attn_self: self.attn_self.iter().map(&mut put).collect(),
            attn_nbr: self.attn_nbr.iter().map(&mut put).collect(),
            config: self.config.clone(),
        }
    }
}

/// Parameters living on a tape.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub weights: Vec<Var>,
    pub attn_self: Vec<Var>,
    pub attn_nbr: Vec<Var>,
    config: EncoderConfig,
}

impl BoundParams {
    /// Same order as [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        self.weights
            .iter()
            .chain(&self.attn_self)
            .chain(&self.attn_nbr)
            .copied()
            .collect()
    }
}

/// Propagation operator for one observed edge list, precomputed per
/// architecture. Edge `k` of the list owns weight slot `k`.
#[derive(Clone, Debug)]
pub struct MessageGraph {
    arch: Arch,
    n_nodes: usize,
    n_edges: usize,
    /// Normalised operator of the unweighted graph (unit-valued for GAT).
    adj: Rc<SparseAdjacency>,
    /// Unit-valued operator with one weight slot per entry.
    unit: Rc<SparseAdjacency>,
    entry_rows: Rc<Vec<usize>>,
    entry_cols: Rc<Vec<usize>>,
    /// Entry of `unit` -> edge index; self entries map to `n_edges`.
    entry_slots: Rc<Vec<usize>>,
    /// Entry of `unit` -> its row for edge entries, `n_nodes` for self entries.
    row_factor: Rc<Vec<usize>>,
}

impl MessageGraph {
    /// `edges` must be distinct undirected pairs without self-loops.
    pub fn build(arch: Arch, n_nodes: usize, edges: &[Edge]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut deg = vec![0usize; n_nodes];
        for &(i, j) in edges {
            let hi = i.max(j);
            if hi >= n_nodes {
                return Err(Error::Index {
                    context: "message graph",
                    index: hi,
                    bound: n_nodes,
                });
            }
            if i == j || !seen.insert(canonical(i, j)) {
                return Err(Error::Ingest(format!(
                    "edge ({i}, {j}) is a self-loop or duplicate"
                )));
            }
            deg[i] += 1;
            deg[j] += 1;
        }
        let m = edges.len();
        // Unit-valued operator with one slot per entry: both directions of
        // every edge, then one self entry per node.
        let nnz = 2 * m + n_nodes;
        let mut unit = SparseAdjacency::new(n_nodes, n_nodes, nnz);
        let mut entry_slots = Vec::with_capacity(nnz);
        let mut row_factor = Vec::with_capacity(nnz);
        for (k, &(i, j)) in edges.iter().enumerate() {
            for (a, b) in [(i, j), (j, i)] {
                unit.push(a, b, 1.0, Some(entry_slots.len()))?;
                entry_slots.push(k);
                row_factor.push(a);
            }
        }
        for i in 0..n_nodes {
            unit.push(i, i, 1.0, Some(entry_slots.len()))?;
            entry_slots.push(m);
            row_factor.push(n_nodes);
        }
        let unit = Rc::new(unit);
        let adj = match arch {
            Arch::Gcn => {
                let dhat: Vec<f64> = deg.iter().map(|&d| d as f64 + 1.0).collect();
                let mut adj = SparseAdjacency::new(n_nodes, n_nodes, m);
                for (k, &(i, j)) in edges.iter().enumerate() {
                    let v = 1.0 / (dhat[i] * dhat[j]).sqrt();
                    adj.push(i, j, v, Some(k))?;
                    adj.push(j, i, v, Some(k))?;
                }
                for (i, &d) in dhat.iter().enumerate() {
                    adj.push(i, i, 1.0 / d, None)?;
                }
                Rc::new(adj)
            }
            Arch::Sage => {
                let mut adj = SparseAdjacency::new(n_nodes, n_nodes, m);
                for (k, &(i, j)) in edges.iter().enumerate() {
                    adj.push(i, j, 1.0 / deg[i] as f64, Some(k))?;
                    adj.push(j, i, 1.0 / deg[j] as f64, Some(k))?;
                }
                for i in 0..n_nodes {
                    adj.push(i, i, 1.0, None)?;
                }
                Rc::new(adj)
            }
            Arch::Gat => unit.clone(),
        };
        Ok(MessageGraph {
            arch,
            n_nodes,
            n_edges: m,
            entry_rows: Rc::new(unit.entry_rows().to_vec()),
            entry_cols: Rc::new(unit.entry_cols().to_vec()),
            adj,
            unit,
            entry_slots: Rc::new(entry_slots),
            row_factor: Rc::new(row_factor),
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn adjacency(&self) -> &SparseAdjacency {
        &self.adj
    }
}

/// Node representations `U` (n x hidden).
///
/// `edge_weights`, when given, is a positive `n_edges x 1` column of soft
/// edge selections; aggregation is renormalised by the weighted degree
/// (see [`weighted_coefficients`]).
pub fn encode(
    tape: &mut Tape,
    params: &BoundParams,
    graph: &MessageGraph,
    x: Var,
    edge_weights: Option<Var>,
) -> Result<Var> {
    if params.config.arch != graph.arch {
        return Err(Error::config(
            "arch",
            format!("parameters are {} but graph was built for {}", params.config.arch, graph.arch),
        ));
    }
    let xt = tape.value(x);
    if xt.rows() != graph.n_nodes {
        return Err(Error::shape(
            "encode",
            format!("{} feature rows for {} nodes", xt.rows(), graph.n_nodes),
        ));
    }
    if let Some(w) = edge_weights {
        if tape.value(w).shape() != (graph.n_edges, 1) {
            return Err(Error::shape(
                "encode",
                format!("edge weights {:?} for {} edges", tape.value(w).shape(), graph.n_edges),
            ));
        }
    }
    let weighted = match edge_weights {
        Some(w) => Some(weighted_coefficients(tape, graph, w)?),
        None => None,
    };

    let n_layers = params.weights.len();
    let mut h = x;
    for (l, &w) in params.weights.iter().enumerate() {
        let hw = tape.matmul(h, w)?;
        let z = match graph.arch {
            Arch::Gcn | Arch::Sage => match weighted {
                Some(coef) => tape.spmm(graph.unit.clone(), hw, Some(coef))?,
                None => tape.spmm(graph.adj.clone(), hw, None)?,
            },
            Arch::Gat => {
                let s_self = tape.matmul(hw, params.attn_self[l])?;
                let s_nbr = tape.matmul(hw, params.attn_nbr[l])?;
                let s_i = tape.gather_rows(s_self, graph.entry_rows.clone())?;
                let s_j = tape.gather_rows(s_nbr, graph.entry_cols.clone())?;
                let s = tape.add(s_i, s_j)?;
                let mut s = tape.leaky_relu(s, params.config.attention_slope)?;
                if let Some(log_w) = weighted {
                    s = tape.add(s, log_w)?;
                }
                let alpha = tape.segment_softmax(s, graph.entry_rows.clone())?;
                tape.spmm(graph.adj.clone(), hw, Some(alpha))?
            }
        };
        h = if l + 1 < n_layers {
            match params.config.activation {
                Activation::Relu => tape.relu(z)?,
                Activation::Elu => tape.elu(z, 1.0)?,
            }
        } else {
            z
        };
    }
    Ok(h)
}

/// Per-entry coefficients of the weighted operator for edge weights `w`
/// (`n_edges x 1`, positive).
///
/// * GCN: `w_ij / sqrt(d_i d_j)` with `d_i = 1 + Σ_j w_ij`; self entry `1/d_i`.
/// * SAGE: `w_ij / Σ_j w_ij`; self entry 1.
/// * GAT: `log w_ij`, added to the attention scores before the softmax
///   (self entry 0).
///
/// With unit weights every case reduces to the unweighted operator.
fn weighted_coefficients(tape: &mut Tape, graph: &MessageGraph, w: Var) -> Result<Var> {
    let n = graph.n_nodes;
    let ones = tape.constant(Tensor::ones(n, 1));
    let one = tape.constant(Tensor::scalar(1.0));
    let zero = tape.constant(Tensor::scalar(0.0));
    match graph.arch {
        Arch::Gcn => {
            let ext = tape.concat_rows(w, one)?;
            let ew = tape.gather_rows(ext, graph.entry_slots.clone())?;
            let deg = tape.spmm(graph.unit.clone(), ones, Some(ew))?;
            let log_deg = tape.log(deg)?;
            let log_s = tape.scale(log_deg, -0.5)?;
            let s = tape.exp(log_s)?;
            let si = tape.gather_rows(s, graph.entry_rows.clone())?;
            let sj = tape.gather_rows(s, graph.entry_cols.clone())?;
            let c = tape.mul(ew, si)?;
            tape.mul(c, sj)
        }
        Arch::Sage => {
            let ext0 = tape.concat_rows(w, zero)?;
            let ew_nbr = tape.gather_rows(ext0, graph.entry_slots.clone())?;
            let total = tape.spmm(graph.unit.clone(), ones, Some(ew_nbr))?;
            let total = tape.clamp(total, crate::autodiff::CLAMP_MIN, f64::INFINITY)?;
            let log_total = tape.log(total)?;
            let neg = tape.scale(log_total, -1.0)?;
            let inv = tape.exp(neg)?;
            let inv_ext = tape.concat_rows(inv, one)?;
            let fac = tape.gather_rows(inv_ext, graph.row_factor.clone())?;
            let ext1 = tape.concat_rows(w, one)?;
            let ew = tape.gather_rows(ext1, graph.entry_slots.clone())?;
            tape.mul(ew, fac)
        }
        Arch::Gat => {
            let log_w = tape.log(w)?;
            let ext = tape.concat_rows(log_w, zero)?;
            tape.gather_rows(ext, graph.entry_slots.clone())
        }
    }
}

fn endpoint_indices(queries: &[Edge]) -> (Rc<Vec<usize>>, Rc<Vec<usize>>) {
    let src = queries.iter().map(|e| e.0).collect();
    let dst = queries.iter().map(|e| e.1).collect();
    (Rc::new(src), Rc::new(dst))
}

/// Dot-product logit `u_i · u_j` per query (column).
pub fn edge_logits(tape: &mut Tape, u: Var, queries: &[Edge]) -> Result<Var> {
    let h = edge_representations(tape, u, queries)?;
    tape.row_sum(h)
}

/// Hadamard edge representation `u_i ⊙ u_j`, one row per query.
pub fn edge_representations(tape: &mut Tape, u: Var, queries: &[Edge]) -> Result<Var> {
    let (src, dst) = endpoint_indices(queries);
    let ui = tape.gather_rows(u, src)?;
    let uj = tape.gather_rows(u, dst)?;
    tape.mul(ui, uj)
}

/// Inference-only forward pass.
pub fn forward(params: &ModelParams, graph: &MessageGraph, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let u = encode(&mut tape, &bound, graph, xv, None)?;
    Ok(tape.value(u).clone())
}

/// Logits of `queries` under an inference-only forward pass.
pub fn score_edges(params: &ModelParams, graph: &MessageGraph, x: &Tensor, queries: &[Edge]) -> Result<Vec<f64>> {
    let u = forward(params, graph, x)?;
    queries
        .iter()
        .map(|&(i, j)| {
            if i.max(j) >= u.rows() {
                return Err(Error::Index {
                    context: "score_edges",
                    index: i.max(j),
                    bound: u.rows(),
                });
            }
            Ok(u.row(i).iter().zip(u.row(j)).map(|(a, b)| a * b).sum())
        })
        .collect()
}
