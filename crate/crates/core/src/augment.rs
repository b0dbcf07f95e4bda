//! Hybrid graph augmentation and the DropEdge transform.
//!
//! The operator space has four members; each call to [`sample_hybrid`] picks
//! operators uniformly and draws their strength uniformly from the open
//! range of that operator. Node count never changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::tensor::Tensor;

pub const EDGE_REMOVING_MAX: f64 = 0.5;
pub const FEATURE_MASKING_MAX: f64 = 0.3;
pub const FEATURE_DROPPING_MAX: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AugmentationOp {
    /// Drop each observed edge independently with this probability.
    EdgeRemoving(f64),
    /// Zero each feature column with this probability.
    FeatureMasking(f64),
    /// Zero each feature entry with this probability.
    FeatureDropping(f64),
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AugmentationKind {
    EdgeRemoving,
    FeatureMasking,
    FeatureDropping,
    Identity,
}

impl AugmentationOp {
    pub fn kind(&self) -> AugmentationKind {
        match self {
            AugmentationOp::EdgeRemoving(_) => AugmentationKind::EdgeRemoving,
            AugmentationOp::FeatureMasking(_) => AugmentationKind::FeatureMasking,
            AugmentationOp::FeatureDropping(_) => AugmentationKind::FeatureDropping,
            AugmentationOp::Identity => AugmentationKind::Identity,
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            AugmentationOp::EdgeRemoving(t)
            | AugmentationOp::FeatureMasking(t)
            | AugmentationOp::FeatureDropping(t) => Some(t),
            AugmentationOp::Identity => None,
        }
    }

    /// Uniform operator, strength uniform in the operator's open range.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        match rng.random_range(0..4) {
            0 => AugmentationOp::EdgeRemoving(open_uniform(EDGE_REMOVING_MAX, rng)),
            1 => AugmentationOp::FeatureMasking(open_uniform(FEATURE_MASKING_MAX, rng)),
            2 => AugmentationOp::FeatureDropping(open_uniform(FEATURE_DROPPING_MAX, rng)),
            _ => AugmentationOp::Identity,
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, edges: &[Edge], x: &Tensor, rng: &mut R) -> (Vec<Edge>, Tensor) {
        match *self {
            AugmentationOp::EdgeRemoving(p) => (
                edges.iter().copied().filter(|_| rng.random::<f64>() >= p).collect(),
                x.clone(),
            ),
            AugmentationOp::FeatureMasking(p) => {
                let keep: Vec<bool> = (0..x.cols()).map(|_| rng.random::<f64>() >= p).collect();
                let mut out = x.clone();
                for r in 0..out.rows() {
                    for (v, &k) in out.row_mut(r).iter_mut().zip(&keep) {
                        if !k {
                            *v = 0.0;
                        }
                    }
                }
                (edges.to_vec(), out)
            }
            AugmentationOp::FeatureDropping(p) => {
                let mut out = x.clone();
                for v in out.data_mut() {
                    if rng.random::<f64>() < p {
                        *v = 0.0;
                    }
                }
                (edges.to_vec(), out)
            }
            AugmentationOp::Identity => (edges.to_vec(), x.clone()),
        }
    }
}

fn open_uniform<R: Rng + ?Sized>(hi: f64, rng: &mut R) -> f64 {
    loop {
        let t = rng.random_range(0.0..hi);
        if t > 0.0 {
            return t;
        }
    }
}

/// Composite operator `T = T_n ∘ … ∘ T_1`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HybridAugmentation {
    pub ops: Vec<AugmentationOp>,
}

impl HybridAugmentation {
    pub fn identity() -> Self {
        HybridAugmentation {
            ops: vec![AugmentationOp::Identity],
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, edges: &[Edge], x: &Tensor, rng: &mut R) -> (Vec<Edge>, Tensor) {
        let mut cur = (edges.to_vec(), x.clone());
        for op in &self.ops {
            cur = op.apply(&cur.0, &cur.1, rng);
        }
        cur
    }
}

/// Draws `n_ops` operators independently.
pub fn sample_hybrid<R: Rng + ?Sized>(n_ops: usize, rng: &mut R) -> HybridAugmentation {
    HybridAugmentation {
        ops: (0..n_ops).map(|_| AugmentationOp::sample(rng)).collect(),
    }
}

/// Independent Bernoulli edge removal with probability `p`.
pub fn drop_edge<R: Rng + ?Sized>(edges: &[Edge], p: f64, rng: &mut R) -> Result<Vec<Edge>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config("dropedge_p", format!("must lie in [0, 1), got {p}")));
    }
    Ok(edges.iter().copied().filter(|_| rng.random::<f64>() >= p).collect())
}

/// Two independent generators for the two augmented views of a run.
pub fn view_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut a = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ChaCha8Rng::seed_from_u64(seed);
    a.set_stream(1);
    b.set_stream(2);
    (a, b)
}
