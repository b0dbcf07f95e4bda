//! Training objectives.
//!
//! * `standard`: binary cross-entropy on the (noisy) training queries.
//! * `rgib_ssl`: supervision averaged over two augmented views, plus a
//!   self-adversarial alignment term and a Gaussian-kernel uniformity term
//!   on the edge representations.
//! * `gib`: `rgib_ssl` without the uniformity term.
//! * `rgib_rep`: a sampler sharing the encoder weights scores every observed
//!   edge and every positive training label; the scores softly select the
//!   message-passing edges and re-weight the supervision, while a binary-KL
//!   penalty toward a constant prior `tau` keeps the selection from
//!   collapsing.
//! * `dropedge`: `standard` on a randomly thinned adjacency (see `augment`).

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encoder::{edge_logits, edge_representations, encode, BoundParams, MessageGraph};
use crate::error::{Error, Result};
use crate::graph::{Edge, QuerySet};
use crate::tensor::Tensor;

/// Clamp keeping selection probabilities strictly inside (0, 1).
pub const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard,
    Gib,
    Dropedge,
    RgibSsl,
    RgibRep,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Standard,
        Mode::Gib,
        Mode::Dropedge,
        Mode::RgibSsl,
        Mode::RgibRep,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Gib => "gib",
            Mode::Dropedge => "dropedge",
            Mode::RgibSsl => "rgib_ssl",
            Mode::RgibRep => "rgib_rep",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "mode",
                    format!(
                        "unknown mode `{s}`, expected one of {}",
                        Mode::ALL.map(|m| m.as_str()).join(", ")
                    ),
                )
            })
    }
}

/// Loss coefficients and constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub mode: Mode,
    pub lambda_s: f64,
    pub lambda_a: f64,
    pub lambda_u: f64,
    #[serde(rename = "lambda_A")]
    pub lambda_topo: f64,
    #[serde(rename = "lambda_Y")]
    pub lambda_label: f64,
    /// Margin of the negative alignment term.
    pub gamma: f64,
    /// Shift inside the negative-pair softmax weights.
    pub alpha_shift: f64,
    /// Prior edge probability of the selection constraints.
    pub tau: f64,
    /// Operators composed per augmented view.
    pub aug_ops: usize,
    /// Upper bound on sampled (positive, negative) pairs for the uniformity term.
    pub unif_pairs: usize,
    pub dropedge_p: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            mode: Mode::Standard,
            lambda_s: 1.0,
            lambda_a: 1.0,
            lambda_u: 0.001,
            lambda_topo: 0.2,
            lambda_label: 0.2,
            gamma: 1.0,
            alpha_shift: 1.0,
            tau: 0.7,
            aug_ops: 1,
            unif_pairs: 512,
            dropedge_p: 0.2,
        }
    }
}

impl ObjectiveConfig {
    pub fn with_mode(mode: Mode) -> Self {
        ObjectiveConfig {
            mode,
            ..Default::default()
        }
    }

    /// Range checks; every violation names its key.
    pub fn validate(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        for (k, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_a", self.lambda_a),
            ("lambda_u", self.lambda_u),
            ("lambda_A", self.lambda_topo),
            ("lambda_Y", self.lambda_label),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(Error::config(k, format!("must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            errs.push(Error::config("tau", format!("must lie in (0, 1), got {}", self.tau)));
        }
        if !self.gamma.is_finite() {
            errs.push(Error::config("gamma", "must be finite"));
        }
        if !self.alpha_shift.is_finite() {
            errs.push(Error::config("alpha_shift", "must be finite"));
        }
        if self.aug_ops == 0 {
            errs.push(Error::config("aug_ops", "must be at least 1"));
        }
        if self.unif_pairs == 0 {
            errs.push(Error::config("unif_pairs", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropedge_p) {
            errs.push(Error::config("dropedge_p", format!("must lie in [0, 1), got {}", self.dropedge_p)));
        }
        errs
    }
}

/// Effective coefficients of one step: supervision and two regularisers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub supervision: f64,
    pub reg1: f64,
    pub reg2: f64,
}

impl LossWeights {
    pub fn supervised_only() -> Self {
        LossWeights {
            supervision: 1.0,
            reg1: 0.0,
            reg2: 0.0,
        }
    }
}

/// Mean binary cross-entropy of a logit column.
pub fn bce_loss(tape: &mut Tape, logits: Var, labels: &[f64]) -> Result<Var> {
    let per = tape.bce_with_logits(logits, Rc::new(labels.to_vec()))?;
    tape.mean(per)
}

/// `sum_i w_i · bce_i / N`.
pub fn weighted_bce_loss(tape: &mut Tape, logits: Var, labels: &[f64], weights: Var) -> Result<Var> {
    let per = tape.bce_with_logits(logits, Rc::new(labels.to_vec()))?;
    let weighted = tape.mul(per, weights)?;
    tape.mean(weighted)
}

/// Squared row distances `‖a_i − b_i‖²` as a column.
fn row_sq_dist(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let d = tape.sub(a, b)?;
    let d2 = tape.square(d)?;
    tape.row_sum(d2)
}

/// Draws one partner `≠ i` per row.
pub fn sample_partners<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::shape("alignment_loss", "need at least 2 rows to sample negatives"));
    }
    Ok((0..n)
        .map(|i| {
            let j = rng.random_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect())
}

/// Self-adversarial alignment with an explicit negative partner per row.
///
/// `R = Σ_i p⁺_i ‖h¹_i − h²_i‖² + Σ_i p⁻_i (γ − ‖h¹_i − h²_{π(i)}‖²)`, with
/// `p⁺ = softmax(‖h¹ − h²‖²)` and `p⁻ = softmax(α − ‖h¹ − h²_π‖²)` treated as
/// constants.
pub fn alignment_loss_with_partners(
    tape: &mut Tape,
    h1: Var,
    h2: Var,
    partners: &[usize],
    gamma: f64,
    alpha: f64,
) -> Result<Var> {
    let n = tape.value(h1).rows();
    if n < 2 {
        return Err(Error::shape("alignment_loss", "need at least 2 rows to sample negatives"));
    }
    if partners.len() != n || partners.iter().enumerate().any(|(i, &p)| p == i || p >= n) {
        return Err(Error::shape("alignment_loss", "partners must be distinct from their row"));
    }
    let d_pos = row_sq_dist(tape, h1, h2)?;
    let p_pos = tape.softmax_vector(d_pos)?;
    let p_pos = tape.detach(p_pos);
    let r_pos = tape.mul(p_pos, d_pos)?;
    let r_pos = tape.sum(r_pos)?;

    let h2_neg = tape.gather_rows(h2, Rc::new(partners.to_vec()))?;
    let d_neg = row_sq_dist(tape, h1, h2_neg)?;
    let margin = tape.scale(d_neg, -1.0)?;
    let shifted = tape.add_scalar(margin, alpha)?;
    let p_neg = tape.softmax_vector(shifted)?;
    let p_neg = tape.detach(p_neg);
    let margin = tape.add_scalar(margin, gamma)?;
    let r_neg = tape.mul(p_neg, margin)?;
    let r_neg = tape.sum(r_neg)?;
    tape.add(r_pos, r_neg)
}

/// [`alignment_loss_with_partners`] with one uniformly drawn partner per row.
pub fn alignment_loss<R: Rng + ?Sized>(
    tape: &mut Tape,
    h1: Var,
    h2: Var,
    gamma: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<Var> {
    let partners = sample_partners(tape.value(h1).rows(), rng)?;
    alignment_loss_with_partners(tape, h1, h2, &partners, gamma, alpha)
}

/// Gaussian-potential uniformity over sampled (positive, negative) row pairs,
/// on unit-normalised rows:
/// `Σ_k exp(−‖h¹_{p_k} − h¹_{n_k}‖²) + exp(−‖h²_{p_k} − h²_{n_k}‖²)`.
pub fn uniformity_loss(
    tape: &mut Tape,
    h1: Var,
    h2: Var,
    pos_idx: &[usize],
    neg_idx: &[usize],
) -> Result<Var> {
    if pos_idx.is_empty() || neg_idx.is_empty() {
        return Err(Error::shape("uniformity_loss", "empty positive or negative set"));
    }
    if pos_idx.len() != neg_idx.len() {
        return Err(Error::shape("uniformity_loss", "pair lists differ in length"));
    }
    let pos = Rc::new(pos_idx.to_vec());
    let neg = Rc::new(neg_idx.to_vec());
    let mut terms = Vec::with_capacity(2);
    for h in [h1, h2] {
        let hn = tape.normalize_rows(h)?;
        let a = tape.gather_rows(hn, pos.clone())?;
        let b = tape.gather_rows(hn, neg.clone())?;
        let d = row_sq_dist(tape, a, b)?;
        let d = tape.scale(d, -1.0)?;
        let k = tape.exp(d)?;
        terms.push(tape.sum(k)?);
    }
    tape.add(terms[0], terms[1])
}

/// `K = min(#pos, #neg, cap)` pairs; row indices refer to `queries.edges()`.
pub fn sample_uniformity_pairs<R: Rng + ?Sized>(
    queries: &QuerySet,
    cap: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let (n_pos, n_neg) = (queries.pos.len(), queries.neg.len());
    let k = n_pos.min(n_neg).min(cap);
    let pos = (0..k).map(|_| rng.random_range(0..n_pos)).collect();
    let neg = (0..k).map(|_| n_pos + rng.random_range(0..n_neg)).collect();
    (pos, neg)
}

/// One augmented view of the observed graph.
pub struct View<'a> {
    pub graph: &'a MessageGraph,
    pub x: Var,
}

/// Individual terms of a two-view loss.
#[derive(Clone, Copy, Debug)]
pub struct SslTerms {
    pub loss: Var,
    pub supervision: Var,
    pub alignment: Option<Var>,
    pub uniformity: Option<Var>,
}

/// `λ_s · ½(L(H₁) + L(H₂)) + λ_a · R_align + λ_u · R_unif`, where
/// `weights.reg1 = λ_a` and `weights.reg2 = λ_u`.
///
/// Regularisers with a zero coefficient are not evaluated and draw no
/// random numbers.
pub fn rgib_ssl_loss<R: Rng + ?Sized>(
    tape: &mut Tape,
    cfg: &ObjectiveConfig,
    params: &BoundParams,
    views: (View<'_>, View<'_>),
    queries: &QuerySet,
    weights: LossWeights,
    rng: &mut R,
) -> Result<SslTerms> {
    let edges = queries.edges();
    let labels = queries.labels();
    let u1 = encode(tape, params, views.0.graph, views.0.x, None)?;
    let u2 = encode(tape, params, views.1.graph, views.1.x, None)?;
    let l1 = edge_logits(tape, u1, &edges)?;
    let l2 = edge_logits(tape, u2, &edges)?;
    let c1 = bce_loss(tape, l1, &labels)?;
    let c2 = bce_loss(tape, l2, &labels)?;
    let sup = tape.add(c1, c2)?;
    let sup = tape.scale(sup, 0.5)?;
    let mut loss = tape.scale(sup, weights.supervision)?;

    let mut alignment = None;
    let mut uniformity = None;
    if weights.reg1 != 0.0 || weights.reg2 != 0.0 {
        let h1 = edge_representations(tape, u1, &edges)?;
        let h2 = edge_representations(tape, u2, &edges)?;
        if weights.reg1 != 0.0 {
            let n1 = tape.normalize_rows(h1)?;
            let n2 = tape.normalize_rows(h2)?;
            let r = alignment_loss(tape, n1, n2, cfg.gamma, cfg.alpha_shift, rng)?;
            let scaled = tape.scale(r, weights.reg1)?;
            loss = tape.add(loss, scaled)?;
            alignment = Some(r);
        }
        if weights.reg2 != 0.0 {
            let (pos, neg) = sample_uniformity_pairs(queries, cfg.unif_pairs, rng);
            let r = uniformity_loss(tape, h1, h2, &pos, &neg)?;
            let scaled = tape.scale(r, weights.reg2)?;
            loss = tape.add(loss, scaled)?;
            uniformity = Some(r);
        }
    }
    Ok(SslTerms {
        loss,
        supervision: sup,
        alignment,
        uniformity,
    })
}

/// Sampler output: selection probabilities on observed edges and on the
/// positive training labels.
#[derive(Clone, Copy, Debug)]
pub struct ReparamState {
    /// One probability per observed edge (`n_obs x 1`).
    pub p_obs: Var,
    /// One probability per positive training query (`n_pos x 1`).
    pub p_label: Var,
}

/// `P_e = σ(u_i · u_j)` with `U = f(Ã, X)`, evaluated only on observed
/// edges and positive training labels and clamped into (0, 1).
pub fn compute_edge_probs(
    tape: &mut Tape,
    params: &BoundParams,
    graph: &MessageGraph,
    x: Var,
    observed: &[Edge],
    label_pos: &[Edge],
) -> Result<ReparamState> {
    let u = encode(tape, params, graph, x, None)?;
    let probs = |tape: &mut Tape, edges: &[Edge]| -> Result<Var> {
        let l = edge_logits(tape, u, edges)?;
        let p = tape.sigmoid(l)?;
        tape.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    };
    let p_obs = probs(tape, observed)?;
    let p_label = probs(tape, label_pos)?;
    Ok(ReparamState { p_obs, p_label })
}

/// Mean binary KL of every probability to the constant `tau`:
/// `P log(P/τ) + (1−P) log((1−P)/(1−τ))`, with `0·log 0 = 0`.
pub fn constraint_penalty(tape: &mut Tape, probs: Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::config("tau", format!("must lie in (0, 1), got {tau}")));
    }
    let log_p = tape.log(probs)?;
    let log_ratio = tape.add_scalar(log_p, -tau.ln())?;
    let a = tape.mul(probs, log_ratio)?;
    let q = tape.scale(probs, -1.0)?;
    let q = tape.add_scalar(q, 1.0)?;
    let log_q = tape.log(q)?;
    let log_q_ratio = tape.add_scalar(log_q, -(1.0 - tau).ln())?;
    let b = tape.mul(q, log_q_ratio)?;
    let kl = tape.add(a, b)?;
    tape.mean(kl)
}

/// Terms of the reparameterised loss.
#[derive(Clone, Copy, Debug)]
pub struct RepTerms {
    pub loss: Var,
    pub supervision: Var,
    pub state: Option<ReparamState>,
}

/// `λ_s · L_cls(f(Z_A), Z_Y) + λ_A · R_A + λ_Y · R_Y`, with
/// `weights.reg1 = λ_A` and `weights.reg2 = λ_Y`.
///
/// `Z_A` is realised as per-edge message weights `P` on the observed edges
/// (aggregation renormalised by weighted degree) and `Z_Y` as per-sample
/// weights `P` on the positive training labels, negatives keeping weight 1.
/// The label weights enter the supervision as constants; `P` on the labels
/// is shaped by `R_Y` alone. With `selection = false` every weight is pinned
/// to 1 and the constraints are dropped.
#[allow(clippy::too_many_arguments)]
pub fn rgib_rep_loss(
    tape: &mut Tape,
    cfg: &ObjectiveConfig,
    params: &BoundParams,
    graph: &MessageGraph,
    x: Var,
    observed: &[Edge],
    queries: &QuerySet,
    weights: LossWeights,
    selection: bool,
) -> Result<RepTerms> {
    if graph.n_edges() != observed.len() {
        return Err(Error::shape("rgib_rep_loss", "message graph does not match the observed edges"));
    }
    let edges = queries.edges();
    let labels = queries.labels();
    let n_neg = queries.neg.len();
    let (edge_w, sample_w, state) = if selection {
        let st = compute_edge_probs(tape, params, graph, x, observed, &queries.pos)?;
        let ones = tape.constant(Tensor::ones(n_neg, 1));
        let label_w = tape.detach(st.p_label);
        let sw = tape.concat_rows(label_w, ones)?;
        (st.p_obs, sw, Some(st))
    } else {
        let ew = tape.constant(Tensor::ones(observed.len(), 1));
        let sw = tape.constant(Tensor::ones(edges.len(), 1));
        (ew, sw, None)
    };
    let u = encode(tape, params, graph, x, Some(edge_w))?;
    let logits = edge_logits(tape, u, &edges)?;
    let sup = weighted_bce_loss(tape, logits, &labels, sample_w)?;
    let mut loss = tape.scale(sup, weights.supervision)?;
    if let Some(st) = state {
        if weights.reg1 != 0.0 {
            let r = constraint_penalty(tape, st.p_obs, cfg.tau)?;
            let r = tape.scale(r, weights.reg1)?;
            loss = tape.add(loss, r)?;
        }
        if weights.reg2 != 0.0 {
            let r = constraint_penalty(tape, st.p_label, cfg.tau)?;
            let r = tape.scale(r, weights.reg2)?;
            loss = tape.add(loss, r)?;
        }
    }
    Ok(RepTerms {
        loss,
        supervision: sup,
        state,
    })
}

/// Standard supervised loss on a single graph.
pub fn standard_loss(
    tape: &mut Tape,
    params: &BoundParams,
    graph: &MessageGraph,
    x: Var,
    queries: &QuerySet,
) -> Result<Var> {
    let u = encode(tape, params, graph, x, None)?;
    let logits = edge_logits(tape, u, &queries.edges())?;
    bce_loss(tape, logits, &queries.labels())
}
