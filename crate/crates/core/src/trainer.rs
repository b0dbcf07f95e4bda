//! Training loop: Adam, loss-weight schedulers, validation-AUC early stopping.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{drop_edge, sample_hybrid, view_rngs};
use crate::autodiff::Tape;
use crate::encoder::{encode, EncoderConfig, MessageGraph, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, QuerySet};
use crate::metrics::auc;
use crate::noise::NoisySplit;
use crate::objectives::{
    compute_edge_probs, rgib_rep_loss, rgib_ssl_loss, standard_loss, LossWeights, Mode, ObjectiveConfig, View,
};
use crate::optim::Adam;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Constant,
    Linear,
    Sin,
    Cos,
    Exp,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [
        SchedulerKind::Constant,
        SchedulerKind::Linear,
        SchedulerKind::Sin,
        SchedulerKind::Cos,
        SchedulerKind::Exp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::Constant => "constant",
            SchedulerKind::Linear => "linear",
            SchedulerKind::Sin => "sin",
            SchedulerKind::Cos => "cos",
            SchedulerKind::Exp => "exp",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "scheduler",
                    format!(
                        "unknown scheduler `{s}`, expected one of {}",
                        SchedulerKind::ALL.map(|k| k.as_str()).join(", ")
                    ),
                )
            })
    }
}

/// Supervision weight `α_t` at normalised progress `t ∈ [0, 1]`; the two
/// regularisers receive `1 − α_t`.
///
/// `param` is `c` for `constant` and `k` for `linear` and `exp`; the
/// exponential form is `(e^{kt} − 1)/(e^k − 1)` (reducing to `t` at `k = 0`).
pub fn scheduler_alpha(kind: SchedulerKind, param: f64, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let a = match kind {
        SchedulerKind::Constant => param,
        SchedulerKind::Linear => param * t,
        SchedulerKind::Sin => (t * std::f64::consts::FRAC_PI_2).sin(),
        SchedulerKind::Cos => (t * std::f64::consts::FRAC_PI_2).cos(),
        SchedulerKind::Exp => {
            if param.abs() < 1e-12 {
                t
            } else {
                (param * t).exp_m1() / param.exp_m1()
            }
        }
    };
    a.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seeds: Vec<u64>,
    pub scheduler: SchedulerKind,
    pub scheduler_param: f64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            lr: 1e-3,
            patience: 100,
            seeds: vec![0, 1, 2, 3, 4],
            scheduler: SchedulerKind::Constant,
            scheduler_param: 0.5,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        if self.epochs == 0 {
            errs.push(Error::config("epochs", "must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            errs.push(Error::config("lr", format!("must be > 0, got {}", self.lr)));
        }
        if self.patience > self.epochs {
            errs.push(Error::config(
                "patience",
                format!("{} exceeds epochs ({})", self.patience, self.epochs),
            ));
        }
        if self.eval_every == 0 {
            errs.push(Error::config("eval_every", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            errs.push(Error::config("seeds", "need at least one seed"));
        }
        if !self.scheduler_param.is_finite() {
            errs.push(Error::config("scheduler_param", "must be finite"));
        }
        errs
    }

    /// Effective loss coefficients at `epoch`.
    pub fn weights(&self, obj: &ObjectiveConfig, epoch: usize) -> LossWeights {
        let t = if self.epochs > 1 {
            epoch as f64 / (self.epochs - 1) as f64
        } else {
            1.0
        };
        let a = scheduler_alpha(self.scheduler, self.scheduler_param, t);
        match obj.mode {
            Mode::Standard | Mode::Dropedge => LossWeights::supervised_only(),
            Mode::Gib => LossWeights {
                supervision: obj.lambda_s * a,
                reg1: obj.lambda_a * (1.0 - a),
                reg2: 0.0,
            },
            Mode::RgibSsl => LossWeights {
                supervision: obj.lambda_s * a,
                reg1: obj.lambda_a * (1.0 - a),
                reg2: obj.lambda_u * (1.0 - a),
            },
            Mode::RgibRep => LossWeights {
                supervision: obj.lambda_s * a,
                reg1: obj.lambda_topo * (1.0 - a),
                reg2: obj.lambda_label * (1.0 - a),
            },
        }
    }
}

/// Everything one training run needs.
#[derive(Clone, Debug)]
pub struct RunSpec<'a> {
    pub graph: &'a Graph,
    pub noisy: &'a NoisySplit,
    pub encoder: EncoderConfig,
    pub objective: ObjectiveConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub valid_auc: Option<f64>,
}

/// Parameters of the best validation epoch.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub mode: Mode,
    pub best_epoch: usize,
    pub best_valid_auc: f64,
}

impl TrainedModel {
    /// Node representations on the observed `edges`. A reparameterised model
    /// aggregates with its own edge probabilities.
    pub fn embed(&self, x: &Tensor, edges: &[Edge]) -> Result<Tensor> {
        embed(&self.params, self.mode, x, edges)
    }

    /// Dot-product logits of `queries` given the observed `edges`.
    pub fn score(&self, x: &Tensor, edges: &[Edge], queries: &[Edge]) -> Result<Vec<f64>> {
        let u = self.embed(x, edges)?;
        Ok(dot_scores(&u, queries))
    }

    /// Edge probabilities of the sampler on `edges` (reparameterised mode).
    pub fn edge_probabilities(&self, x: &Tensor, edges: &[Edge]) -> Result<Vec<f64>> {
        let graph = MessageGraph::build(self.params.config.arch, x.rows(), edges)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let st = compute_edge_probs(&mut tape, &bound, &graph, xv, edges, &[])?;
        Ok(tape.value(st.p_obs).data().to_vec())
    }

    /// Test-set AUC on the observed adjacency of `noisy`.
    pub fn test_auc(&self, g: &Graph, noisy: &NoisySplit) -> Result<f64> {
        query_auc(&self.params, self.mode, g.features(), &noisy.obs_noisy, &noisy.base.test)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: Vec<EpochLog>,
}

fn embed(params: &ModelParams, mode: Mode, x: &Tensor, edges: &[Edge]) -> Result<Tensor> {
    let graph = MessageGraph::build(params.config.arch, x.rows(), edges)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let weights = if mode == Mode::RgibRep {
        Some(compute_edge_probs(&mut tape, &bound, &graph, xv, edges, &[])?.p_obs)
    } else {
        None
    };
    let u = encode(&mut tape, &bound, &graph, xv, weights)?;
    Ok(tape.value(u).clone())
}

fn dot_scores(u: &Tensor, queries: &[Edge]) -> Vec<f64> {
    queries
        .iter()
        .map(|&(i, j)| u.row(i).iter().zip(u.row(j)).map(|(a, b)| a * b).sum())
        .collect()
}

fn query_auc(params: &ModelParams, mode: Mode, x: &Tensor, edges: &[Edge], q: &QuerySet) -> Result<f64> {
    let u = embed(params, mode, x, edges)?;
    auc(&dot_scores(&u, &q.edges()), &q.labels())
}

fn diverged(epoch: usize, err: Error) -> Error {
    match err {
        Error::NonFinite(op) => Error::Diverged {
            epoch,
            detail: format!("non-finite value produced by {op}"),
        },
        other => other,
    }
}

/// Runs the optimisation loop of `run.objective.mode`.
///
/// Every epoch: fresh augmentation views (`gib`, `rgib_ssl`), a fresh
/// DropEdge sample (`dropedge`) or freshly recomputed selection
/// probabilities (`rgib_rep`); one Adam step; validation AUC every
/// `eval_every` epochs. The parameters of the best validation epoch are
/// returned. Identical inputs give bitwise-identical histories.
pub fn train(run: &RunSpec<'_>) -> Result<TrainOutcome> {
    let cfg = &run.train;
    let obj = &run.objective;
    if let Some(e) = cfg.validate().into_iter().chain(obj.validate()).next() {
        return Err(e);
    }
    let g = run.graph;
    let x = g.features();
    let n = g.n_nodes();
    let noisy = run.noisy;
    let arch = run.encoder.arch;

    let mut init_rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut loss_rng = ChaCha8Rng::seed_from_u64(run.seed);
    loss_rng.set_stream(3);
    let (mut view_rng1, mut view_rng2) = view_rngs(run.seed);

    let mut params = ModelParams::init(&run.encoder, x.cols(), &mut init_rng)?;
    let mut opt = Adam::new(cfg.lr);
    let obs_graph = MessageGraph::build(arch, n, &noisy.obs_noisy)?;
    let train_q = &noisy.train_noisy;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 0..cfg.epochs {
        let weights = cfg.weights(obj, epoch);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, true);
        let xv = tape.constant(x.clone());
        let loss = (|| -> Result<_> {
            match obj.mode {
                Mode::Standard => standard_loss(&mut tape, &bound, &obs_graph, xv, train_q),
                Mode::Dropedge => {
                    let kept = drop_edge(&noisy.obs_noisy, obj.dropedge_p, &mut loss_rng)?;
                    let dg = MessageGraph::build(arch, n, &kept)?;
                    standard_loss(&mut tape, &bound, &dg, xv, train_q)
                }
                Mode::Gib | Mode::RgibSsl => {
                    let t1 = sample_hybrid(obj.aug_ops, &mut view_rng1);
                    let t2 = sample_hybrid(obj.aug_ops, &mut view_rng2);
                    let (e1, x1) = t1.apply(&noisy.obs_noisy, x, &mut view_rng1);
                    let (e2, x2) = t2.apply(&noisy.obs_noisy, x, &mut view_rng2);
                    let g1 = MessageGraph::build(arch, n, &e1)?;
                    let g2 = MessageGraph::build(arch, n, &e2)?;
                    let v1 = View {
                        graph: &g1,
                        x: tape.constant(x1),
                    };
                    let v2 = View {
                        graph: &g2,
                        x: tape.constant(x2),
                    };
                    Ok(rgib_ssl_loss(&mut tape, obj, &bound, (v1, v2), train_q, weights, &mut loss_rng)?.loss)
                }
                Mode::RgibRep => Ok(rgib_rep_loss(
                    &mut tape,
                    obj,
                    &bound,
                    &obs_graph,
                    xv,
                    &noisy.obs_noisy,
                    train_q,
                    weights,
                    true,
                )?
                .loss),
            }
        })()
        .map_err(|e| diverged(epoch, e))?;

        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("loss = {loss_value}, weights = {weights:?}"),
            });
        }
        let grads = tape.backward(loss);
        let grad_tensors: Vec<Tensor> = bound.vars().into_iter().map(|v| grads.get_or_zeros(v)).collect();
        if let Some(k) = grad_tensors.iter().position(|t| !t.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                detail: format!("non-finite gradient for parameter {k}, loss = {loss_value}"),
            });
        }
        opt.step(params.tensors_mut(), &grad_tensors)?;

        let mut valid_auc = None;
        if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
            let a = query_auc(&params, obj.mode, x, &noisy.obs_noisy, &noisy.base.valid)?;
            valid_auc = Some(a);
            if best.as_ref().is_none_or(|(b, _, _)| a > *b) {
                best = Some((a, epoch, params.clone()));
            }
        }
        history.push(EpochLog {
            epoch,
            loss: loss_value,
            valid_auc,
        });
        if let Some((_, best_epoch, _)) = &best {
            if epoch - best_epoch >= cfg.patience {
                log::debug!("early stop at epoch {epoch}, best {best_epoch}");
                break;
            }
        }
    }

    let (best_valid_auc, best_epoch, params) = best.ok_or_else(|| Error::config("epochs", "no evaluation ran"))?;
    Ok(TrainOutcome {
        model: TrainedModel {
            params,
            mode: obj.mode,
            best_epoch,
            best_valid_auc,
        },
        history,
    })
}
