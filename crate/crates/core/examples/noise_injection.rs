//! Bilateral noise on a block-model graph: injected counts and the feature
//! homophily of clean versus injected edges.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_link::graph::{generate_sbm, split_edges, SbmConfig, SplitRatios};
use robust_link::metrics::mean_std;
use robust_link::noise::{homophily_report, inject_bilateral, EdgeClass, NoiseSpec};

fn main() -> robust_link::Result<()> {
    let sbm = SbmConfig::new(500, 10, 0.1, 0.002, 32);
    let g = generate_sbm(&sbm, &mut ChaCha8Rng::seed_from_u64(1))?;
    let split = split_edges(&g, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(2))?;
    println!(
        "{} nodes, {} edges; {} observed, {} train positives",
        g.n_nodes(),
        g.n_edges(),
        split.train_obs.len(),
        split.train.pos.len()
    );

    for eps in [0.2, 0.4, 0.6] {
        let noisy = inject_bilateral(&g, &split, NoiseSpec::bilateral(eps, 3))?;
        let rows = homophily_report(&g, &noisy)?;
        let mean_of = |c: EdgeClass| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.class == c).map(|r| r.cosine).collect();
            mean_std(&xs).0
        };
        println!(
            "eps {eps:.1}: +{} input edges, +{} label edges | homophily clean {:.3} input {:.3} label {:.3}",
            noisy.input_noise.len(),
            noisy.label_noise.len(),
            mean_of(EdgeClass::Clean),
            mean_of(EdgeClass::InputNoise),
            mean_of(EdgeClass::LabelNoise),
        );
    }
    Ok(())
}
