use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_link::config::{preset, ExperimentConfig};
use robust_link::graph::{load_graph, split_edges, SplitRatios};
use robust_link::harness::{run_experiment, worker_count};
use robust_link::metrics::{format_summary, mean_std, summarize};
use robust_link::noise::{homophily_report, inject_bilateral, write_homophily_csv, EdgeClass, NoiseSpec};

#[derive(Parser)]
#[command(name = "robust-link", version, about = "Link prediction under bilateral edge noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid cell of a config over its seeds.
    Run {
        /// TOML config file, or `preset:<name>`.
        config: String,
        /// Override `objective.aug_ops`.
        #[arg(long)]
        aug_ops: Option<usize>,
        /// Override `objective.dropedge_p`.
        #[arg(long)]
        dropedge_p: Option<f64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: String },
    /// Inject noise into a graph and report counts and feature homophily.
    NoiseProbe {
        edges: PathBuf,
        features: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eps_a: f64,
        #[arg(long, default_value_t = 0.0)]
        eps_y: f64,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        /// Seed of the edge split.
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Write per-edge homophily rows to this CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

fn load_config(spec: &str) -> robust_link::Result<(ExperimentConfig, PathBuf)> {
    if let Some(name) = spec.strip_prefix("preset:") {
        let cfg = preset(name).ok_or_else(|| robust_link::Error::Config {
            key: "preset".into(),
            msg: format!("unknown preset `{name}`"),
        })?;
        return Ok((cfg, PathBuf::from(".")));
    }
    let path = Path::new(spec);
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((ExperimentConfig::from_file(path)?, base))
}

fn run(spec: &str, aug_ops: Option<usize>, dropedge_p: Option<f64>, out: Option<PathBuf>) -> robust_link::Result<ExitCode> {
    let (mut cfg, base) = load_config(spec)?;
    if let Some(k) = aug_ops {
        cfg.objective.aug_ops = k;
    }
    if let Some(p) = dropedge_p {
        cfg.objective.dropedge_p = p;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let errs = cfg.validate(&base);
    if !errs.is_empty() {
        for e in &errs {
            eprintln!("error: {e}");
        }
        return Ok(ExitCode::from(2));
    }
    let report = run_experiment(&cfg, &base, worker_count())?;
    print!("{}", format_summary(&summarize(&report.records)));
    println!("results: {}", report.results_path.display());
    let failed = report.n_failed();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", report.records.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(spec: &str) -> robust_link::Result<ExitCode> {
    let (cfg, base) = load_config(spec)?;
    let errs = cfg.validate(&base);
    for e in &errs {
        println!("{e}");
    }
    if errs.is_empty() {
        println!("ok");
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}

fn noise_probe(
    edges: &Path,
    features: &Path,
    spec: NoiseSpec,
    split_seed: u64,
    dump: Option<&Path>,
) -> robust_link::Result<ExitCode> {
    let g = load_graph(edges, features)?;
    let split = split_edges(&g, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(split_seed))?;
    let noisy = inject_bilateral(&g, &split, spec)?;
    let n_obs = split.train_obs.len();
    let n_pos = split.train.pos.len();
    println!("nodes {}  edges {}", g.n_nodes(), g.n_edges());
    println!(
        "input noise  {:>6} / {:<6} observed  ratio {:.4}  (eps_a {})",
        noisy.input_noise.len(),
        n_obs,
        noisy.input_noise.len() as f64 / n_obs.max(1) as f64,
        spec.eps_a
    );
    println!(
        "label noise  {:>6} / {:<6} positives ratio {:.4}  (eps_y {})",
        noisy.label_noise.len(),
        n_pos,
        noisy.label_noise.len() as f64 / n_pos.max(1) as f64,
        spec.eps_y
    );
    let rows = homophily_report(&g, &noisy)?;
    for class in [EdgeClass::Clean, EdgeClass::InputNoise, EdgeClass::LabelNoise] {
        let xs: Vec<f64> = rows.iter().filter(|r| r.class == class).map(|r| r.cosine).collect();
        if xs.is_empty() {
            continue;
        }
        let (m, s) = mean_std(&xs);
        println!("homophily {class:<12} n {:>6}  mean {m:.4} ± {s:.4}", xs.len());
    }
    if let Some(p) = dump {
        write_homophily_csv(p, &rows)?;
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            aug_ops,
            dropedge_p,
            out,
        } => run(&config, aug_ops, dropedge_p, out),
        Command::Validate { config } => validate(&config),
        Command::NoiseProbe {
            edges,
            features,
            eps_a,
            eps_y,
            noise_seed,
            split_seed,
            dump,
        } => noise_probe(
            &edges,
            &features,
            NoiseSpec {
                eps_a,
                eps_y,
                seed: noise_seed,
            },
            split_seed,
            dump.as_deref(),
        ),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
