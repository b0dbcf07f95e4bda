//! Grid execution: every cell × seed is an independent job on a bounded
//! worker pool, and one writer appends finished records in job order.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, NoiseSides};
use crate::encoder::{Arch, EncoderConfig};
use crate::error::{Error, Result};
use crate::graph::{split_edges, Graph};
use crate::metrics::{alignment, emit_results, test_representations, uniformity_energy, MetricsRecord};
use crate::noise::{inject_bilateral, NoiseSpec, NoisySplit};
use crate::objectives::{Mode, ObjectiveConfig};
use crate::trainer::{train, RunSpec, TrainOutcome};

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "ROBUST_LINK_WORKERS";

/// Name of the results file inside the output directory.
pub const RESULTS_FILE: &str = "results.csv";

/// One point of the experiment grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub arch: Arch,
    pub layers: usize,
    pub mode: Mode,
    pub variant: String,
    pub objective: ObjectiveConfig,
    pub eps_a: f64,
    pub eps_y: f64,
}

/// Cross product `arch × layers × mode × variant × eps`, in that nesting
/// order. The `default` variant is always present.
pub fn expand_grid(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let archs = cfg.archs()?;
    let modes = cfg.modes()?;
    let mut cells = Vec::new();
    for &arch in &archs {
        for &layers in &cfg.grid.layers {
            for &mode in &modes {
                let mut variants = vec![("default".to_string(), cfg.objective.clone())];
                variants.extend(
                    cfg.variants
                        .iter()
                        .filter(|v| v.applies_to(mode))
                        .map(|v| (v.name.clone(), v.apply(&cfg.objective))),
                );
                for (variant, objective) in variants {
                    for &eps in &cfg.grid.eps {
                        let (eps_a, eps_y) = match cfg.grid.noise {
                            NoiseSides::Bilateral => (eps, eps),
                            NoiseSides::Input => (eps, 0.0),
                            NoiseSides::Label => (0.0, eps),
                        };
                        cells.push(Cell {
                            arch,
                            layers,
                            mode,
                            variant: variant.clone(),
                            objective: ObjectiveConfig {
                                mode,
                                ..objective.clone()
                            },
                            eps_a,
                            eps_y,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Pool size: `ROBUST_LINK_WORKERS` when set to a positive integer,
/// otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Derived seed of the noise draw for run `seed`, distinct from the split
/// and initialisation streams.
pub fn noise_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
}

struct Outcome {
    test_auc: f64,
    valid_auc: f64,
    alignment: f64,
    uniformity: f64,
}

/// Split, noise injection and training of one job, following the seeding
/// protocol of [`run_job`].
pub fn train_cell(cfg: &ExperimentConfig, g: &Graph, cell: &Cell, seed: u64) -> Result<(NoisySplit, TrainOutcome)> {
    let split = split_edges(g, cfg.dataset.ratios(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    let spec = NoiseSpec {
        eps_a: cell.eps_a,
        eps_y: cell.eps_y,
        seed: noise_seed(seed),
    };
    let noisy = inject_bilateral(g, &split, spec)?;
    let encoder: EncoderConfig = cfg.encoder(cell.arch, cell.layers)?;
    let run = RunSpec {
        graph: g,
        noisy: &noisy,
        encoder,
        objective: cell.objective.clone(),
        train: cfg.train.clone(),
        seed,
    };
    let out = train(&run)?;
    Ok((noisy, out))
}

fn run_cell(cfg: &ExperimentConfig, g: &Graph, cell: &Cell, seed: u64) -> Result<Outcome> {
    let (noisy, out) = train_cell(cfg, g, cell, seed)?;
    let model = &out.model;
    let test_auc = model.test_auc(g, &noisy)?;
    let align_eps = cfg.eval.align_eps.unwrap_or(cell.eps_a);
    let alignment = alignment(model, g, &noisy, align_eps, cfg.eval.align_rounds, seed)?;
    let h = test_representations(model, g, &noisy, &noisy.obs_noisy)?;
    let uniformity = uniformity_energy(&h, cfg.eval.unif_sample, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(Outcome {
        test_auc,
        valid_auc: model.best_valid_auc,
        alignment,
        uniformity,
    })
}

/// Runs one cell for one seed; any error or panic becomes a failed record.
pub fn run_job(cfg: &ExperimentConfig, g: &Graph, cell: &Cell, seed: u64) -> MetricsRecord {
    let t0 = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| run_cell(cfg, g, cell, seed)));
    let mut rec = MetricsRecord {
        dataset: cfg.dataset.name.clone(),
        arch: cell.arch.to_string(),
        layers: cell.layers,
        mode: cell.mode.to_string(),
        eps_a: cell.eps_a,
        eps_y: cell.eps_y,
        seed,
        test_auc: None,
        valid_auc: None,
        alignment: None,
        uniformity: None,
        wall_time_s: 0.0,
        variant: cell.variant.clone(),
        status: "ok".into(),
    };
    match result {
        Ok(Ok(o)) => {
            rec.test_auc = Some(o.test_auc);
            rec.valid_auc = Some(o.valid_auc);
            rec.alignment = Some(o.alignment);
            rec.uniformity = Some(o.uniformity);
        }
        Ok(Err(e)) => rec.status = format!("failed: {e}"),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            rec.status = format!("failed: panic: {msg}");
        }
    }
    rec.wall_time_s = t0.elapsed().as_secs_f64();
    rec
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub records: Vec<MetricsRecord>,
    pub results_path: PathBuf,
}

impl RunReport {
    pub fn n_failed(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Executes every cell × seed of `cfg` and appends the records to
/// `<output_dir>/results.csv` (relative output dirs resolve against `base`).
///
/// Records are written in job order regardless of completion order, each
/// as soon as all earlier jobs have been written. Failed runs are recorded
/// and do not stop the remaining jobs.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path, workers: usize) -> Result<RunReport> {
    let errs = cfg.validate(base);
    if let Some(e) = errs.into_iter().next() {
        return Err(e);
    }
    let g = cfg.dataset.load(base)?;
    let cells = expand_grid(cfg)?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| cfg.train.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let out_dir = if cfg.output_dir.is_absolute() {
        cfg.output_dir.clone()
    } else {
        base.join(&cfg.output_dir)
    };
    let results_path = out_dir.join(RESULTS_FILE);
    log::info!(
        "{}: {} cells x {} seeds on {} workers",
        cfg.name,
        cells.len(),
        cfg.train.seeds.len(),
        workers
    );

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, MetricsRecord)>();
    let mut records = Vec::with_capacity(jobs.len());
    let mut write_err: Option<Error> = None;
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(jobs.len().max(1)) {
            let tx = tx.clone();
            let (next, jobs, cells, g) = (&next, &jobs, &cells, &g);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(c, seed)) = jobs.get(k) else { break };
                let rec = run_job(cfg, g, &cells[c], seed);
                if tx.send((k, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut written = 0;
        for (k, rec) in rx {
            if !rec.is_ok() {
                log::warn!("job {k} failed: {}", rec.status);
            }
            pending.insert(k, rec);
            while let Some(rec) = pending.remove(&written) {
                if write_err.is_none() {
                    if let Err(e) = emit_results(&results_path, std::slice::from_ref(&rec)) {
                        write_err = Some(e);
                    }
                }
                records.push(rec);
                written += 1;
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    Ok(RunReport { records, results_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Variant};

    #[test]
    fn grid_cardinality() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.modes = vec!["standard".into(), "rgib_ssl".into()];
        cfg.grid.eps = vec![0.2, 0.4, 0.6];
        assert_eq!(expand_grid(&cfg).unwrap().len(), 6);
        cfg.variants.push(Variant {
            name: "no-unif".into(),
            modes: vec!["rgib_ssl".into()],
            lambda_u: Some(0.0),
            ..Default::default()
        });
        let cells = expand_grid(&cfg).unwrap();
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().filter(|c| c.variant == "no-unif").all(|c| c.objective.lambda_u == 0.0));
    }

    #[test]
    fn ablation_preset_cells() {
        let cells = expand_grid(&preset("ablation").unwrap()).unwrap();
        // ssl: default + 3 variants, rep: default + 3 variants
        assert_eq!(cells.len(), 8);
    }

    #[test]
    fn noise_sides() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.eps = vec![0.3];
        cfg.grid.noise = NoiseSides::Label;
        let c = &expand_grid(&cfg).unwrap()[0];
        assert_eq!((c.eps_a, c.eps_y), (0.0, 0.3));
    }
}
