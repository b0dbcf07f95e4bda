//! Bilateral edge noise: random false-positive edges injected into the
//! observed adjacency (input side) and into the training labels
//! (supervision side), plus the feature-cosine homophily diagnostic.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_non_edges, Edge, EdgeSplit, Graph, QuerySet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Input-noise ratio, relative to the observed training adjacency.
    pub eps_a: f64,
    /// Label-noise ratio, relative to the training positives.
    pub eps_y: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn bilateral(eps: f64, seed: u64) -> Self {
        NoiseSpec {
            eps_a: eps,
            eps_y: eps,
            seed,
        }
    }

    pub fn clean(seed: u64) -> Self {
        Self::bilateral(0.0, seed)
    }
}

/// Number of edges added for ratio `eps` over `base` edges.
pub fn noise_count(eps: f64, base: usize) -> usize {
    (eps * base as f64).round() as usize
}

/// A clean split with its noisy counterparts `Ã` and `Ỹ`.
#[derive(Clone, Debug)]
pub struct NoisySplit {
    pub base: EdgeSplit,
    /// Injected input-noise edges `A'`.
    pub input_noise: Vec<Edge>,
    /// Injected label-noise edges (false positives in the training queries).
    pub label_noise: Vec<Edge>,
    /// Observed adjacency fed to the encoder: clean observations plus `A'`.
    pub obs_noisy: Vec<Edge>,
    /// Training queries with the label noise appended to the positives.
    pub train_noisy: QuerySet,
}

impl NoisySplit {
    /// Wraps a split with no noise.
    pub fn clean(base: EdgeSplit) -> Self {
        NoisySplit {
            obs_noisy: base.train_obs.clone(),
            train_noisy: base.train.clone(),
            input_noise: Vec::new(),
            label_noise: Vec::new(),
            base,
        }
    }

    /// Positives and negatives of every split plus all injected edges; new
    /// random edges must avoid this set.
    fn occupied(&self, g: &Graph) -> HashSet<Edge> {
        let mut set = g.edge_set().clone();
        set.extend(self.base.all_negatives().copied());
        set.extend(self.input_noise.iter().copied());
        set.extend(self.label_noise.iter().copied());
        set
    }
}

fn check_ratio(key: &str, eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::config(key, format!("noise ratio must be >= 0, got {eps}")));
    }
    Ok(())
}

/// Adds `round(eps_a·|train_obs|)` random non-edges to the observed adjacency
/// and `round(eps_y·|train positives|)` further random non-edges as label-1
/// training queries.
///
/// All injected edges are distinct, absent from the clean graph, and avoid
/// every sampled query negative. Valid/test queries are untouched.
pub fn inject_bilateral(g: &Graph, split: &EdgeSplit, spec: NoiseSpec) -> Result<NoisySplit> {
    check_ratio("eps_a", spec.eps_a)?;
    check_ratio("eps_y", spec.eps_y)?;
    let n_a = noise_count(spec.eps_a, split.train_obs.len());
    let n_y = noise_count(spec.eps_y, split.train.pos.len());

    let mut noisy = NoisySplit::clean(split.clone());
    let exclude = noisy.occupied(g);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut drawn = sample_non_edges(g.n_nodes(), &exclude, n_a + n_y, &mut rng)?;
    let label_noise = drawn.split_off(n_a);

    noisy.obs_noisy.extend(drawn.iter().copied());
    noisy.train_noisy.pos.extend(label_noise.iter().copied());
    noisy.input_noise = drawn;
    noisy.label_noise = label_noise;
    log::debug!(
        "injected {} input-noise and {} label-noise edges",
        noisy.input_noise.len(),
        noisy.label_noise.len()
    );
    Ok(noisy)
}

/// Fresh input-side perturbation of the clean observed adjacency:
/// `train_obs` plus `round(eps·|train_obs|)` random non-edges.
pub fn perturb_observed<R: Rng + ?Sized>(
    g: &Graph,
    noisy: &NoisySplit,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<Edge>> {
    check_ratio("eps", eps)?;
    let obs = &noisy.base.train_obs;
    let exclude = noisy.occupied(g);
    let extra = sample_non_edges(g.n_nodes(), &exclude, noise_count(eps, obs.len()), rng)?;
    Ok(obs.iter().chain(&extra).copied().collect())
}

/// Cosine similarity of endpoint features for each edge; 0 when either
/// endpoint has an all-zero feature row.
pub fn edge_homophily(g: &Graph, edges: &[Edge]) -> Result<Vec<f64>> {
    let x = g.features();
    edges
        .iter()
        .map(|&(i, j)| {
            let bound = x.rows();
            for k in [i, j] {
                if k >= bound {
                    return Err(Error::Index {
                        context: "edge_homophily",
                        index: k,
                        bound,
                    });
                }
            }
            Ok(cosine(x.row(i), x.row(j)))
        })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeClass {
    Clean,
    InputNoise,
    LabelNoise,
}

impl EdgeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeClass::Clean => "clean",
            EdgeClass::InputNoise => "input-noise",
            EdgeClass::LabelNoise => "label-noise",
        }
    }
}

impl std::fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomophilyRow {
    pub src: usize,
    pub dst: usize,
    pub cosine: f64,
    pub class: EdgeClass,
}

/// Homophily of clean observed edges and of both injected edge sets.
pub fn homophily_report(g: &Graph, noisy: &NoisySplit) -> Result<Vec<HomophilyRow>> {
    let groups = [
        (EdgeClass::Clean, &noisy.base.train_obs),
        (EdgeClass::InputNoise, &noisy.input_noise),
        (EdgeClass::LabelNoise, &noisy.label_noise),
    ];
    let mut rows = Vec::new();
    for (class, edges) in groups {
        for (&(src, dst), cosine) in edges.iter().zip(edge_homophily(g, edges)?) {
            rows.push(HomophilyRow {
                src,
                dst,
                cosine,
                class,
            });
        }
    }
    Ok(rows)
}

pub fn write_homophily_csv(path: &Path, rows: &[HomophilyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
