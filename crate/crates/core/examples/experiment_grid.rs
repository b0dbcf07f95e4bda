//! A small grid (two modes × three noise ratios × two seeds) through the
//! harness, with the results CSV re-read and summarised.

use robust_link::config::ExperimentConfig;
use robust_link::harness::{expand_grid, run_experiment, worker_count};
use robust_link::metrics::{format_summary, read_results, summarize};

const CONFIG: &str = r#"
name = "example-grid"
output_dir = "example-grid"

[dataset]
n = 300
blocks = 10
p_in = 0.2
p_out = 0.002
feature_dim = 32

[grid]
archs = ["gcn"]
layers = [2]
modes = ["standard", "dropedge"]
eps = [0.0, 0.3, 0.6]

[model]
hidden = 32

[train]
epochs = 80
lr = 0.01
patience = 40
seeds = [0, 1]
eval_every = 5
"#;

fn main() -> robust_link::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let base = std::env::temp_dir().join("robust-link-example");
    let _ = std::fs::remove_dir_all(&base);
    println!("{} cells", expand_grid(&cfg)?.len());

    let report = run_experiment(&cfg, &base, worker_count())?;
    println!("{} runs, {} failed -> {}", report.records.len(), report.n_failed(), report.results_path.display());

    let records = read_results(&report.results_path)?;
    print!("{}", format_summary(&summarize(&records)));
    Ok(())
}
