//! Standard BCE training of a GCN on clean and noisy versions of one split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_link::encoder::{Arch, EncoderConfig};
use robust_link::graph::{generate_sbm, split_edges, SbmConfig, SplitRatios};
use robust_link::noise::{inject_bilateral, NoiseSpec};
use robust_link::objectives::{Mode, ObjectiveConfig};
use robust_link::trainer::{train, RunSpec, TrainConfig};

fn main() -> robust_link::Result<()> {
    let mut sbm = SbmConfig::new(400, 20, 0.3, 0.0005, 64);
    sbm.jitter = 0.5;
    let g = generate_sbm(&sbm, &mut ChaCha8Rng::seed_from_u64(2024))?;
    let split = split_edges(&g, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let train_cfg = TrainConfig {
        epochs: 200,
        lr: 0.01,
        patience: 60,
        seeds: vec![0],
        eval_every: 5,
        ..Default::default()
    };

    for arch in [Arch::Gcn, Arch::Sage, Arch::Gat] {
        for eps in [0.0, 0.4] {
            let noisy = inject_bilateral(&g, &split, NoiseSpec::bilateral(eps, 1))?;
            let run = RunSpec {
                graph: &g,
                noisy: &noisy,
                encoder: EncoderConfig::new(arch, 2, 64),
                objective: ObjectiveConfig {
                    mode: Mode::Standard,
                    ..Default::default()
                },
                train: train_cfg.clone(),
                seed: 0,
            };
            let out = train(&run)?;
            println!(
                "{arch} eps {eps:.1}: test AUC {:.4} (best valid {:.4} at epoch {}, {} epochs run)",
                out.model.test_auc(&g, &noisy)?,
                out.model.best_valid_auc,
                out.model.best_epoch,
                out.history.len()
            );
        }
    }
    Ok(())
}
