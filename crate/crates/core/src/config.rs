//! Experiment configuration: a TOML file with one section per concern.
//!
//! ```toml
//! name = "bilateral-sweep"
//! output_dir = "results"
//!
//! [dataset]
//! kind = "sbm"            # or "files" with `edges` and `features`
//! n = 1000
//!
//! [grid]
//! archs = ["gcn"]
//! layers = [4]
//! modes = ["standard", "rgib_ssl", "rgib_rep"]
//! eps = [0.2, 0.4, 0.6]
//!
//! [[variant]]             # optional objective overrides
//! name = "no-unif"
//! lambda_u = 0.0
//! ```
//!
//! Sections `[model]`, `[objective]`, `[train]` and `[eval]` default to the
//! library defaults. Enumerated fields are kept as strings so that
//! [`ExperimentConfig::validate`] can report every bad value with its key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::{Activation, Arch, EncoderConfig};
use crate::error::{Error, Result};
use crate::graph::{load_graph, generate_sbm, Graph, SbmConfig, SplitRatios};
use crate::objectives::{Mode, ObjectiveConfig};
use crate::trainer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Sbm,
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Label written to the `dataset` column of every record.
    pub name: String,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub jitter: f64,
    pub seed: u64,
    pub valid_ratio: f64,
    pub test_ratio: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Sbm,
            name: "sbm".into(),
            edges: None,
            features: None,
            n: 1000,
            blocks: 50,
            p_in: 0.3,
            p_out: 0.0003,
            feature_dim: 128,
            jitter: 0.5,
            seed: 2024,
            valid_ratio: 0.05,
            test_ratio: 0.10,
        }
    }
}

impl DatasetConfig {
    pub fn sbm(&self) -> SbmConfig {
        let mut s = SbmConfig::new(self.n, self.blocks, self.p_in, self.p_out, self.feature_dim);
        s.jitter = self.jitter;
        s
    }

    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: 1.0 - self.valid_ratio - self.test_ratio,
            valid: self.valid_ratio,
            test: self.test_ratio,
        }
    }

    /// Generates or loads the graph; relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Graph> {
        match self.kind {
            DatasetKind::Sbm => {
                use rand::SeedableRng;
                generate_sbm(&self.sbm(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(self.seed))
            }
            DatasetKind::Files => {
                let (e, f) = self.file_paths(base)?;
                load_graph(&e, &f)
            }
        }
    }

    fn file_paths(&self, base: &Path) -> Result<(PathBuf, PathBuf)> {
        let resolve = |p: &Option<PathBuf>, key: &str| -> Result<PathBuf> {
            let p = p
                .as_ref()
                .ok_or_else(|| Error::config(format!("dataset.{key}"), "required when kind = \"files\""))?;
            Ok(if p.is_absolute() { p.clone() } else { base.join(p) })
        };
        Ok((resolve(&self.edges, "edges")?, resolve(&self.features, "features")?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSides {
    #[default]
    Bilateral,
    Input,
    Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub archs: Vec<String>,
    pub layers: Vec<usize>,
    pub modes: Vec<String>,
    pub eps: Vec<f64>,
    /// Which side(s) receive the noise ratio of each `eps` cell.
    pub noise: NoiseSides,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            archs: vec!["gcn".into()],
            layers: vec![2],
            modes: vec!["standard".into()],
            eps: vec![0.0],
            noise: NoiseSides::Bilateral,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub activation: String,
    pub attention_slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let e = EncoderConfig::default();
        ModelConfig {
            hidden: e.hidden,
            activation: "relu".into(),
            attention_slope: e.attention_slope,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Perturbation rounds of the alignment diagnostic.
    pub align_rounds: usize,
    /// Perturbation ratio of the alignment diagnostic; the cell's input-noise
    /// ratio when absent.
    pub align_eps: Option<f64>,
    /// Pair budget of the uniformity energy.
    pub unif_sample: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            align_rounds: 5,
            align_eps: None,
            unif_sample: 4096,
        }
    }
}

/// Objective overrides applied to a subset of grid cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    /// Restricts the variant to these modes; all modes when empty.
    pub modes: Vec<String>,
    pub lambda_s: Option<f64>,
    pub lambda_a: Option<f64>,
    pub lambda_u: Option<f64>,
    #[serde(rename = "lambda_A")]
    pub lambda_topo: Option<f64>,
    #[serde(rename = "lambda_Y")]
    pub lambda_label: Option<f64>,
}

impl Variant {
    pub fn applies_to(&self, mode: Mode) -> bool {
        self.modes.is_empty() || self.modes.iter().any(|m| m == mode.as_str())
    }

    pub fn apply(&self, base: &ObjectiveConfig) -> ObjectiveConfig {
        let mut o = base.clone();
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut o.lambda_s, self.lambda_s);
        set(&mut o.lambda_a, self.lambda_a);
        set(&mut o.lambda_u, self.lambda_u);
        set(&mut o.lambda_topo, self.lambda_topo);
        set(&mut o.lambda_label, self.lambda_label);
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub objective: ObjectiveConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    #[serde(rename = "variant")]
    pub variants: Vec<Variant>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            output_dir: PathBuf::from("results"),
            dataset: DatasetConfig::default(),
            grid: GridConfig::default(),
            model: ModelConfig::default(),
            objective: ObjectiveConfig::default(),
            train: TrainConfig {
                epochs: 300,
                lr: 0.01,
                patience: 100,
                eval_every: 5,
                ..Default::default()
            },
            eval: EvalConfig::default(),
            variants: Vec::new(),
        }
    }
}

fn rekey(key: &str, e: Error) -> Error {
    match e {
        Error::Config { msg, .. } => Error::config(key, msg),
        other => other,
    }
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Config { key, msg } => Error::config(format!("{section}.{key}"), msg),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("<config>", e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { msg, .. } => Error::config(path.display().to_string(), msg),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn archs(&self) -> Result<Vec<Arch>> {
        self.grid.archs.iter().map(|a| a.parse().map_err(|e| rekey("grid.archs", e))).collect()
    }

    pub fn modes(&self) -> Result<Vec<Mode>> {
        self.grid.modes.iter().map(|m| m.parse().map_err(|e| rekey("grid.modes", e))).collect()
    }

    pub fn activation(&self) -> Result<Activation> {
        match self.model.activation.as_str() {
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::Elu),
            other => Err(Error::config(
                "model.activation",
                format!("unknown activation `{other}`, expected one of relu, elu"),
            )),
        }
    }

    pub fn encoder(&self, arch: Arch, layers: usize) -> Result<EncoderConfig> {
        Ok(EncoderConfig {
            arch,
            layers,
            hidden: self.model.hidden,
            activation: self.activation()?,
            attention_slope: self.model.attention_slope,
        })
    }

    /// Every schema and range violation, each naming its key. Relative
    /// dataset paths resolve against `base`.
    pub fn validate(&self, base: &Path) -> Vec<Error> {
        let mut errs = Vec::new();
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Sbm => {
                if d.n < 2 {
                    errs.push(Error::config("dataset.n", "need at least 2 nodes"));
                }
                if d.blocks == 0 || d.blocks > d.n {
                    errs.push(Error::config("dataset.blocks", format!("must lie in [1, n], got {}", d.blocks)));
                }
                for (k, p) in [("p_in", d.p_in), ("p_out", d.p_out)] {
                    if !(0.0..=1.0).contains(&p) {
                        errs.push(Error::config(format!("dataset.{k}"), format!("must lie in [0, 1], got {p}")));
                    }
                }
                if d.p_out > d.p_in {
                    errs.push(Error::config("dataset.p_out", "must not exceed p_in"));
                }
                if d.feature_dim < d.blocks {
                    errs.push(Error::config("dataset.feature_dim", "must be at least the number of blocks"));
                }
                if !(d.jitter >= 0.0 && d.jitter.is_finite()) {
                    errs.push(Error::config("dataset.jitter", "must be >= 0"));
                }
            }
            DatasetKind::Files => match d.file_paths(base) {
                Ok((e, f)) => {
                    for (key, p) in [("dataset.edges", e), ("dataset.features", f)] {
                        if !p.is_file() {
                            errs.push(Error::config(key, format!("file not found: {}", p.display())));
                        }
                    }
                }
                Err(e) => errs.push(e),
            },
        }
        for (k, r) in [("valid_ratio", d.valid_ratio), ("test_ratio", d.test_ratio)] {
            if !(r > 0.0 && r < 1.0) {
                errs.push(Error::config(format!("dataset.{k}"), format!("must lie in (0, 1), got {r}")));
            }
        }
        if d.valid_ratio + d.test_ratio >= 1.0 {
            errs.push(Error::config("dataset.test_ratio", "valid_ratio + test_ratio must be < 1"));
        }

        let g = &self.grid;
        for (key, empty) in [
            ("grid.archs", g.archs.is_empty()),
            ("grid.layers", g.layers.is_empty()),
            ("grid.modes", g.modes.is_empty()),
            ("grid.eps", g.eps.is_empty()),
        ] {
            if empty {
                errs.push(Error::config(key, "must list at least one value"));
            }
        }
        for a in &g.archs {
            if let Err(e) = a.parse::<Arch>() {
                errs.push(rekey("grid.archs", e));
            }
        }
        for m in &g.modes {
            if let Err(e) = m.parse::<Mode>() {
                errs.push(rekey("grid.modes", e));
            }
        }
        for &l in &g.layers {
            if l == 0 {
                errs.push(Error::config("grid.layers", "layer counts must be at least 1"));
            }
        }
        for &e in &g.eps {
            if !(e >= 0.0 && e.is_finite()) {
                errs.push(Error::config("grid.eps", format!("noise ratios must be >= 0, got {e}")));
            }
        }

        if self.model.hidden == 0 {
            errs.push(Error::config("model.hidden", "must be at least 1"));
        }
        if let Err(e) = self.activation() {
            errs.push(e);
        }
        errs.extend(self.objective.validate().into_iter().map(|e| prefixed("objective", e)));
        errs.extend(self.train.validate().into_iter().map(|e| prefixed("train", e)));

        if self.eval.align_rounds == 0 {
            errs.push(Error::config("eval.align_rounds", "must be at least 1"));
        }
        if let Some(a) = self.eval.align_eps {
            if !(a >= 0.0 && a.is_finite()) {
                errs.push(Error::config("eval.align_eps", format!("must be >= 0, got {a}")));
            }
        }
        if self.eval.unif_sample == 0 {
            errs.push(Error::config("eval.unif_sample", "must be at least 1"));
        }

        let mut names = std::collections::HashSet::new();
        for v in &self.variants {
            if v.name.is_empty() || v.name == "default" || !names.insert(v.name.clone()) {
                errs.push(Error::config(
                    "variant.name",
                    format!("`{}` is empty, reserved or repeated", v.name),
                ));
            }
            for m in &v.modes {
                if let Err(e) = m.parse::<Mode>() {
                    errs.push(rekey("variant.modes", e));
                }
            }
            errs.extend(v.apply(&self.objective).validate().into_iter().map(|e| prefixed("variant", e)));
        }
        errs
    }
}

pub const PRESETS: [&str; 3] = ["clean-baseline", "bilateral-sweep", "ablation"];

/// Built-in experiment presets.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig {
        name: name.to_string(),
        output_dir: PathBuf::from(format!("results/{name}")),
        ..Default::default()
    };
    let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match name {
        "clean-baseline" => Some(ExperimentConfig {
            grid: GridConfig {
                archs: strings(&["gcn", "gat", "sage"]),
                layers: vec![2, 4],
                modes: strings(&["standard"]),
                eps: vec![0.0],
                noise: NoiseSides::Bilateral,
            },
            ..base
        }),
        "bilateral-sweep" => Some(ExperimentConfig {
            grid: GridConfig {
                archs: strings(&["gcn"]),
                layers: vec![4],
                modes: strings(&["standard", "dropedge", "gib", "rgib_ssl", "rgib_rep"]),
                eps: vec![0.2, 0.4, 0.6],
                noise: NoiseSides::Bilateral,
            },
            ..base
        }),
        "ablation" => {
            let v = |name: &str, modes: &[&str], f: &dyn Fn(&mut Variant)| {
                let mut var = Variant {
                    name: name.into(),
                    modes: strings(modes),
                    ..Default::default()
                };
                f(&mut var);
                var
            };
            Some(ExperimentConfig {
                grid: GridConfig {
                    archs: strings(&["gcn"]),
                    layers: vec![4],
                    modes: strings(&["rgib_ssl", "rgib_rep"]),
                    eps: vec![0.4],
                    noise: NoiseSides::Bilateral,
                },
                variants: vec![
                    v("no-sup", &["rgib_ssl", "rgib_rep"], &|x| x.lambda_s = Some(0.0)),
                    v("no-align", &["rgib_ssl"], &|x| x.lambda_a = Some(0.0)),
                    v("no-unif", &["rgib_ssl"], &|x| x.lambda_u = Some(0.0)),
                    v("no-topo", &["rgib_rep"], &|x| x.lambda_topo = Some(0.0)),
                    v("no-label", &["rgib_rep"], &|x| x.lambda_label = Some(0.0)),
                ],
                ..base
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert!(cfg.validate(Path::new(".")).is_empty(), "{name}");
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn bad_tau_names_the_key() {
        let cfg = ExperimentConfig::from_toml_str("[objective]\ntau = 1.2\n").unwrap();
        let errs: Vec<String> = cfg.validate(Path::new(".")).iter().map(|e| e.to_string()).collect();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("tau"));
    }

    #[test]
    fn unknown_mode_lists_choices() {
        let cfg = ExperimentConfig::from_toml_str("[grid]\nmodes = [\"robust\"]\n").unwrap();
        let errs: Vec<String> = cfg.validate(Path::new(".")).iter().map(|e| e.to_string()).collect();
        assert!(errs.iter().any(|e| e.contains("grid.modes") && e.contains("rgib_ssl")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[train]\nepoch = 3\n").is_err());
    }
}
