//! Self-supervised robust objective against standard training under 40%
//! bilateral noise, with the effect on representation uniformity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_link::encoder::{Arch, EncoderConfig};
use robust_link::graph::{generate_sbm, split_edges, SbmConfig, SplitRatios};
use robust_link::metrics::{test_representations, uniformity_energy};
use robust_link::noise::{inject_bilateral, NoiseSpec};
use robust_link::objectives::{Mode, ObjectiveConfig};
use robust_link::trainer::{train, RunSpec, SchedulerKind, TrainConfig};

fn main() -> robust_link::Result<()> {
    let mut sbm = SbmConfig::new(400, 20, 0.3, 0.0005, 64);
    sbm.jitter = 0.5;
    let g = generate_sbm(&sbm, &mut ChaCha8Rng::seed_from_u64(2024))?;
    let split = split_edges(&g, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let noisy = inject_bilateral(&g, &split, NoiseSpec::bilateral(0.4, 1))?;

    let runs = [
        (Mode::Standard, SchedulerKind::Constant),
        (Mode::Gib, SchedulerKind::Constant),
        (Mode::RgibSsl, SchedulerKind::Constant),
        (Mode::RgibSsl, SchedulerKind::Linear),
    ];
    for (mode, scheduler) in runs {
        let run = RunSpec {
            graph: &g,
            noisy: &noisy,
            encoder: EncoderConfig::new(Arch::Gcn, 4, 64),
            objective: ObjectiveConfig {
                mode,
                ..Default::default()
            },
            train: TrainConfig {
                epochs: 200,
                lr: 0.01,
                patience: 60,
                eval_every: 5,
                scheduler,
                ..Default::default()
            },
            seed: 0,
        };
        let model = train(&run)?.model;
        let h = test_representations(&model, &g, &noisy, &noisy.obs_noisy)?;
        let energy = uniformity_energy(&h, 4096, &mut ChaCha8Rng::seed_from_u64(0))?;
        println!(
            "{mode:<9} {:<8} test AUC {:.4}  uniformity {energy:.4}",
            scheduler.as_str(),
            model.test_auc(&g, &noisy)?
        );
    }
    Ok(())
}
