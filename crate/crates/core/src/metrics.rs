//! AUC, representation diagnostics and result records.

use std::fs::OpenOptions;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::row_norm;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::noise::{perturb_observed, NoisySplit};
use crate::tensor::Tensor;
use crate::trainer::TrainedModel;

/// Probability that a random positive outranks a random negative, ties
/// counted one half. Rank-sum form, `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("AUC of NaN scores".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y > 0.5).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * order[i..j].iter().filter(|&&k| labels[k] > 0.5).count() as f64;
        i = j;
    }
    let p = n_pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

fn normalized(h: &Tensor) -> Tensor {
    let mut out = h.clone();
    for r in 0..out.rows() {
        let nrm = row_norm(out.row(r));
        out.row_mut(r).iter_mut().for_each(|v| *v /= nrm);
    }
    out
}

fn hadamard_rows(u: &Tensor, queries: &[Edge]) -> Tensor {
    let d = u.cols();
    let mut data = Vec::with_capacity(queries.len() * d);
    for &(i, j) in queries {
        data.extend(u.row(i).iter().zip(u.row(j)).map(|(a, b)| a * b));
    }
    Tensor::from_vec(queries.len(), d, data).expect("consistent shape")
}

/// Unit-normalised edge representations of the test queries under the
/// observed adjacency `edges`.
pub fn test_representations(model: &TrainedModel, g: &Graph, noisy: &NoisySplit, edges: &[Edge]) -> Result<Tensor> {
    let u = model.embed(g.features(), edges)?;
    Ok(normalized(&hadamard_rows(&u, &noisy.base.test.edges())))
}

/// Mean rowwise L2 distance between two row-aligned matrices.
pub fn mean_row_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() || a.rows() == 0 {
        return Err(Error::shape("alignment", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let total: f64 = (0..a.rows())
        .map(|r| {
            a.row(r)
                .iter()
                .zip(b.row(r))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / a.rows() as f64)
}

/// Alignment with explicit perturbation seeds: each pair gives two
/// independent input-noise perturbations at ratio `eps`; the result is the
/// mean over pairs of the mean L2 distance between normalised test-query
/// representations.
pub fn alignment_with_seeds(
    model: &TrainedModel,
    g: &Graph,
    noisy: &NoisySplit,
    eps: f64,
    seeds: &[(u64, u64)],
) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::config("align_rounds", "need at least one round"));
    }
    let mut total = 0.0;
    for &(s1, s2) in seeds {
        let e1 = perturb_observed(g, noisy, eps, &mut ChaCha8Rng::seed_from_u64(s1))?;
        let e2 = perturb_observed(g, noisy, eps, &mut ChaCha8Rng::seed_from_u64(s2))?;
        let h1 = test_representations(model, g, noisy, &e1)?;
        let h2 = test_representations(model, g, noisy, &e2)?;
        total += mean_row_distance(&h1, &h2)?;
    }
    Ok(total / seeds.len() as f64)
}

/// Alignment over `rounds` seed pairs derived from `seed`.
pub fn alignment(
    model: &TrainedModel,
    g: &Graph,
    noisy: &NoisySplit,
    eps: f64,
    rounds: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let seeds: Vec<(u64, u64)> = (0..rounds).map(|_| (rng.random(), rng.random())).collect();
    alignment_with_seeds(model, g, noisy, eps, &seeds)
}

/// `log mean exp(−‖h_a − h_b‖²)` over pairs of unit-normalised rows.
///
/// All distinct pairs are used when there are at most `sample` of them,
/// otherwise `sample` random distinct pairs. Lower means more uniform.
pub fn uniformity_energy<R: Rng + ?Sized>(h: &Tensor, sample: usize, rng: &mut R) -> Result<f64> {
    let n = h.rows();
    if n < 2 {
        return Err(Error::shape("uniformity_energy", format!("need at least 2 rows, got {n}")));
    }
    let hn = normalized(h);
    let kernel = |a: usize, b: usize| -> f64 {
        let d2: f64 = hn.row(a).iter().zip(hn.row(b)).map(|(x, y)| (x - y) * (x - y)).sum();
        (-d2).exp()
    };
    let all_pairs = n * (n - 1) / 2;
    let (sum, count) = if all_pairs <= sample.max(1) {
        let mut s = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                s += kernel(a, b);
            }
        }
        (s, all_pairs)
    } else {
        let mut s = 0.0;
        for _ in 0..sample {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            s += kernel(a, b);
        }
        (s, sample)
    };
    Ok((sum / count as f64).ln())
}

/// Angles (radians) of the normalised rows projected on their top two
/// principal directions.
pub fn projected_angles(h: &Tensor) -> Vec<f64> {
    let hn = normalized(h);
    let (n, d) = hn.shape();
    if n == 0 || d == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(hn.row(r)) {
            *m += v / n as f64;
        }
    }
    let mut centered = hn.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let cov = centered.transpose().matmul(&centered).expect("square");
    let v1 = power_iteration(&cov, &[]);
    let v2 = power_iteration(&cov, std::slice::from_ref(&v1));
    (0..n)
        .map(|r| {
            let row = centered.row(r);
            let x: f64 = row.iter().zip(&v1).map(|(a, b)| a * b).sum();
            let y: f64 = row.iter().zip(&v2).map(|(a, b)| a * b).sum();
            y.atan2(x)
        })
        .collect()
}

fn power_iteration(m: &Tensor, deflate: &[Vec<f64>]) -> Vec<f64> {
    let d = m.rows();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 / d as f64).collect();
    for _ in 0..200 {
        for u in deflate {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let mut w = vec![0.0; d];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = m.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let nrm = row_norm(&w);
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    v
}

/// Writes `index,angle` rows for external plotting.
pub fn write_angle_csv(path: &Path, h: &Tensor) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "angle"])?;
    for (i, a) in projected_angles(h).into_iter().enumerate() {
        w.write_record([i.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One run of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub dataset: String,
    pub arch: String,
    pub layers: usize,
    pub mode: String,
    pub eps_a: f64,
    pub eps_y: f64,
    pub seed: u64,
    pub test_auc: Option<f64>,
    pub valid_auc: Option<f64>,
    pub alignment: Option<f64>,
    pub uniformity: Option<f64>,
    pub wall_time_s: f64,
    pub variant: String,
    /// `ok`, or the error that aborted the run.
    pub status: String,
}

pub const RECORD_HEADER: [&str; 14] = [
    "dataset",
    "arch",
    "layers",
    "mode",
    "eps_a",
    "eps_y",
    "seed",
    "test_auc",
    "valid_auc",
    "alignment",
    "uniformity",
    "wall_time_s",
    "variant",
    "status",
];

impl MetricsRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Appends `records`; the header is written only when the file is new or
/// empty.
pub fn emit_results(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(RECORD_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seed-aggregated view of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub dataset: String,
    pub arch: String,
    pub layers: usize,
    pub mode: String,
    pub variant: String,
    pub eps_a: f64,
    pub eps_y: f64,
    pub runs: usize,
    pub failed: usize,
    pub test_auc: (f64, f64),
    pub alignment: (f64, f64),
    pub uniformity: (f64, f64),
}

/// Groups records by cell, in order of first appearance; failed runs are
/// counted but excluded from the statistics.
pub fn summarize(records: &[MetricsRecord]) -> Vec<CellSummary> {
    type Key = (String, String, usize, String, String, u64, u64);
    let key = |r: &MetricsRecord| -> Key {
        (
            r.dataset.clone(),
            r.arch.clone(),
            r.layers,
            r.mode.clone(),
            r.variant.clone(),
            r.eps_a.to_bits(),
            r.eps_y.to_bits(),
        )
    };
    let mut keys: Vec<Key> = Vec::new();
    for r in records {
        let k = key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let rows: Vec<&MetricsRecord> = records.iter().filter(|r| key(r) == k).collect();
            let ok: Vec<&&MetricsRecord> = rows.iter().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&MetricsRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            CellSummary {
                dataset: k.0,
                arch: k.1,
                layers: k.2,
                mode: k.3,
                variant: k.4,
                eps_a: f64::from_bits(k.5),
                eps_y: f64::from_bits(k.6),
                runs: rows.len(),
                failed: rows.len() - ok.len(),
                test_auc: mean_std(&col(|r| r.test_auc)),
                alignment: mean_std(&col(|r| r.alignment)),
                uniformity: mean_std(&col(|r| r.uniformity)),
            }
        })
        .collect()
}

/// Plain-text table, four decimals.
pub fn format_summary(cells: &[CellSummary]) -> String {
    let mut out = format!(
        "{:<10} {:<5} {:>6} {:<9} {:<10} {:>5} {:>5} {:>4} {:>17} {:>17} {:>17}\n",
        "dataset", "arch", "layers", "mode", "variant", "eps_a", "eps_y", "runs", "test_auc", "alignment", "uniformity"
    );
    for c in cells {
        let fmt = |(m, s): (f64, f64)| format!("{m:.4} ± {s:.4}");
        out.push_str(&format!(
            "{:<10} {:<5} {:>6} {:<9} {:<10} {:>5.2} {:>5.2} {:>4} {:>17} {:>17} {:>17}{}\n",
            c.dataset,
            c.arch,
            c.layers,
            c.mode,
            c.variant,
            c.eps_a,
            c.eps_y,
            c.runs,
            fmt(c.test_auc),
            fmt(c.alignment),
            fmt(c.uniformity),
            if c.failed > 0 {
                format!("  ({} failed)", c.failed)
            } else {
                String::new()
            }
        ));
    }
    out
}
