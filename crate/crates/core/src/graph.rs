//! Immutable undirected graphs, file ingestion, the train/valid/test query
//! split and uniform non-edge sampling.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Undirected node pair, stored as `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

/// Canonical `(min, max)` form of a node pair.
#[inline]
pub fn canonical(i: usize, j: usize) -> Edge {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Node features plus a deduplicated, self-loop-free undirected edge list.
#[derive(Clone, Debug)]
pub struct Graph {
    features: Tensor,
    edges: Vec<Edge>,
    edge_set: HashSet<Edge>,
}

impl Graph {
    /// Canonicalises, deduplicates and strips self-loops from `edges`.
    /// Node count is the feature row count.
    pub fn new(features: Tensor, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = features.rows();
        let mut edge_set = HashSet::new();
        let mut list = Vec::new();
        for (i, j) in edges {
            let bad = i.max(j);
            if bad >= n {
                return Err(Error::Ingest(format!(
                    "node id {bad} has no feature row ({n} rows)"
                )));
            }
            if i == j {
                continue;
            }
            let e = canonical(i, j);
            if edge_set.insert(e) {
                list.push(e);
            }
        }
        list.sort_unstable();
        Ok(Graph {
            features,
            edges: list,
            edge_set,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Symmetric membership test.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_set.contains(&canonical(i, j))
    }

    pub fn edge_set(&self) -> &HashSet<Edge> {
        &self.edge_set
    }

    /// Number of unordered node pairs that are not edges.
    pub fn n_non_edges(&self) -> usize {
        let n = self.n_nodes();
        n * n.saturating_sub(1) / 2 - self.n_edges()
    }
}

/// Reads a whitespace-separated edge list and a headerless CSV feature
/// matrix (row `i` = node `i`).
pub fn load_graph(edge_file: &Path, feature_file: &Path) -> Result<Graph> {
    let features = read_features(feature_file)?;
    let text = fs::read_to_string(edge_file)?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                path: edge_file.to_path_buf(),
                line: lineno + 1,
                msg: "expected two node ids".into(),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                path: edge_file.to_path_buf(),
                line: lineno + 1,
                msg: format!("`{tok}` is not a node id"),
            })
        };
        let mut toks = line.split_whitespace();
        let i = parse(toks.next())?;
        let j = parse(toks.next())?;
        edges.push((i, j));
    }
    Graph::new(features, edges)
}

fn read_features(path: &Path) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("`{tok}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Tensor::from_rows(&rows).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))
}

/// Positive and negative query edges of one split.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuerySet {
    pub pos: Vec<Edge>,
    pub neg: Vec<Edge>,
}

impl QuerySet {
    /// All query edges, positives first.
    pub fn edges(&self) -> Vec<Edge> {
        self.pos.iter().chain(&self.neg).copied().collect()
    }

    /// Labels aligned with [`QuerySet::edges`].
    pub fn labels(&self) -> Vec<f64> {
        let mut y = vec![1.0; self.pos.len()];
        y.resize(self.pos.len() + self.neg.len(), 0.0);
        y
    }

    pub fn len(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fractions of positive edges assigned to train / valid / test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.85,
            valid: 0.05,
            test: 0.10,
        }
    }
}

/// Query partition. Training positives double as the observed adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSplit {
    pub train_obs: Vec<Edge>,
    pub train: QuerySet,
    pub valid: QuerySet,
    pub test: QuerySet,
}

impl EdgeSplit {
    /// Every query negative across the three splits.
    pub fn all_negatives(&self) -> impl Iterator<Item = &Edge> {
        self.train
            .neg
            .iter()
            .chain(&self.valid.neg)
            .chain(&self.test.neg)
    }
}

/// Uniform random 85/5/10 (by default) partition of the positive edges, each
/// part paired with an equal number of distinct sampled non-edges.
pub fn split_edges<R: Rng + ?Sized>(g: &Graph, ratios: SplitRatios, rng: &mut R) -> Result<EdgeSplit> {
    let total = ratios.train + ratios.valid + ratios.test;
    if (total - 1.0).abs() > 1e-9 || [ratios.train, ratios.valid, ratios.test].iter().any(|&r| r < 0.0) {
        return Err(Error::config("ratios", format!("must be non-negative and sum to 1, got {total}")));
    }
    let m = g.n_edges();
    if m < 10 {
        return Err(Error::Capacity(format!("graph has {m} edges, need at least 10")));
    }
    let n_valid = (ratios.valid * m as f64).round() as usize;
    let n_test = (ratios.test * m as f64).round() as usize;
    let n_train = m - n_valid - n_test;

    let mut pos = g.edges().to_vec();
    pos.shuffle(rng);
    let negs = sample_non_edges(g.n_nodes(), g.edge_set(), m, rng)?;

    let train_pos = pos[..n_train].to_vec();
    let valid_pos = pos[n_train..n_train + n_valid].to_vec();
    let test_pos = pos[n_train + n_valid..].to_vec();
    let train_neg = negs[..n_train].to_vec();
    let valid_neg = negs[n_train..n_train + n_valid].to_vec();
    let test_neg = negs[n_train + n_valid..].to_vec();

    Ok(EdgeSplit {
        train_obs: train_pos.clone(),
        train: QuerySet {
            pos: train_pos,
            neg: train_neg,
        },
        valid: QuerySet {
            pos: valid_pos,
            neg: valid_neg,
        },
        test: QuerySet {
            pos: test_pos,
            neg: test_neg,
        },
    })
}

/// Draws `count` distinct node pairs uniformly from the pairs of an
/// `n`-node graph that are not in `exclude`.
pub fn sample_non_edges<R: Rng + ?Sized>(
    n: usize,
    exclude: &HashSet<Edge>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Edge>> {
    let total_pairs = n * n.saturating_sub(1) / 2;
    let excluded = exclude.iter().filter(|&&(i, j)| i < j && j < n).count();
    let available = total_pairs - excluded;
    if count > available {
        return Err(Error::Capacity(format!(
            "need {count} non-edges but only {available} exist"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    // Dense regime: enumerate and take a random prefix.
    if available <= 4 * count || total_pairs <= 200_000 {
        let mut pool: Vec<Edge> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|e| !exclude.contains(e))
            .collect();
        let (chosen, _) = pool.partial_shuffle(rng, count);
        return Ok(chosen.to_vec());
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let e = canonical(i, j);
        if exclude.contains(&e) || !chosen.insert(e) {
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

/// Parameters of the stochastic-block-model generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmConfig {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian jitter added to every feature.
    pub jitter: f64,
}

impl SbmConfig {
    pub fn new(n: usize, blocks: usize, p_in: f64, p_out: f64, feature_dim: usize) -> Self {
        SbmConfig {
            n,
            blocks,
            p_in,
            p_out,
            feature_dim,
            jitter: 0.1,
        }
    }

    /// Block of node `i`; blocks are contiguous and balanced.
    pub fn block_of(&self, i: usize) -> usize {
        i * self.blocks / self.n
    }

    fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.blocks > self.n {
            return Err(Error::config("blocks", "must be in 1..=n"));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) || self.p_out > self.p_in {
            return Err(Error::config("p_in", "require 0 <= p_out <= p_in <= 1"));
        }
        if self.feature_dim < self.blocks {
            return Err(Error::config("feature_dim", "must hold a one-hot block id"));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::config("jitter", "must be non-negative"));
        }
        Ok(())
    }
}

/// Stochastic block model with one-hot block features plus Gaussian jitter.
///
/// `p_in == p_out` is accepted (the structure-free null model).
pub fn generate_sbm<R: Rng + ?Sized>(cfg: &SbmConfig, rng: &mut R) -> Result<Graph> {
    cfg.validate()?;
    let n = cfg.n;
    let mut edges = Vec::new();
    for i in 0..n {
        let bi = cfg.block_of(i);
        for j in i + 1..n {
            let p = if cfg.block_of(j) == bi { cfg.p_in } else { cfg.p_out };
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let mut features = Tensor::zeros(n, cfg.feature_dim);
    let jitter = Normal::new(0.0, cfg.jitter).map_err(|e| Error::config("jitter", e.to_string()))?;
    for i in 0..n {
        let row = features.row_mut(i);
        row[cfg.block_of(i)] = 1.0;
        if cfg.jitter > 0.0 {
            for v in row.iter_mut() {
                *v += jitter.sample(rng);
            }
        }
    }
    Graph::new(features, edges)
}
