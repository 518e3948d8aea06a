//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "model":  { "link_lengths": [0.3, 0.3], "elastic_k": 1000.0 },
//!   "data":   { "kind": "al", "n_train": [5, 10], "eval_size": 1000, "seed": 0 },
//!   "train":  { "epochs": 5000, "hidden": 100, "seeds": [0, 1, 2, 3, 4] },
//!   "losses": { "configs": ["Basic", "Basic+Const+PINN"], "alpha": 1e-5 },
//!   "output": { "directory": "out" }
//! }
//! ```
//!
//! Every section except `data` may be omitted. Unknown keys are rejected and
//! relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use pimbs::arm::{Attachment, Body, Muscle};
use pimbs::dataset::{load_csv, MapKind};
use pimbs::{AdamHyper, ArmModel, DataSource, LossConfig, TrainConfig};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_ALPHAS: [f64; 4] = [1e-5, 1e-6, 1e-7, 1e-8];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub losses: LossSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub link_lengths: Option<[f64; 2]>,
    pub link_masses: Option<[f64; 2]>,
    pub com_offsets: Option<[f64; 2]>,
    pub gravity: Option<f64>,
    pub elastic_k: Option<f64>,
    pub muscles: Option<Vec<MuscleSpec>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleSpec {
    pub origin: AttachmentSpec,
    pub insertion: AttachmentSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachmentSpec {
    pub body: BodySpec,
    pub point: [f64; 2],
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodySpec {
    Base,
    Link1,
    Link2,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NTrain {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// `"al"` or `"atl"`.
    pub kind: String,
    #[serde(default = "default_n_train")]
    pub n_train: NTrain,
    #[serde(default = "default_eval_size")]
    pub eval_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// External dataset; replaces the simulator when present.
    pub csv: Option<PathBuf>,
}

fn default_n_train() -> NTrain {
    NTrain::One(5)
}

fn default_eval_size() -> usize {
    1000
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub hidden: Option<usize>,
    pub eval_stride: Option<usize>,
    pub tension_input_scale: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub adam: AdamSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamSection {
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    /// Configuration names for `train` and `ablation`; all four by default.
    pub configs: Option<Vec<String>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Weights swept by `alpha-sweep`.
    pub alphas: Option<Vec<f64>>,
}

impl Default for LossSection {
    fn default() -> Self {
        Self { configs: None, alpha: default_alpha(), alphas: None }
    }
}

fn default_alpha() -> f64 {
    1e-5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output")]
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_output() }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub full_scale: bool,
}

/// A validated experiment, ready to run.
#[derive(Debug)]
pub struct Experiment {
    pub config_path: PathBuf,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub kind: MapKind,
    pub n_train: Vec<usize>,
    pub seeds: Vec<u64>,
    pub base: TrainConfig,
    pub configs: Vec<LossConfig>,
    pub alphas: Vec<f64>,
    pub source: DataSource,
    /// Simulator model, when data is generated rather than loaded.
    pub model: Option<ArmModel>,
    pub data_seed: u64,
    pub output: PathBuf,
    pub full_scale: bool,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn body(b: BodySpec) -> Body {
    match b {
        BodySpec::Base => Body::Base,
        BodySpec::Link1 => Body::Link1,
        BodySpec::Link2 => Body::Link2,
    }
}

impl ModelSection {
    fn build(&self) -> ArmModel {
        let mut m = ArmModel::default();
        if let Some(v) = self.link_lengths {
            m.link_lengths = v;
        }
        if let Some(v) = self.link_masses {
            m.link_masses = v;
        }
        if let Some(v) = self.com_offsets {
            m.com_offsets = v;
        }
        if let Some(v) = self.gravity {
            m.gravity = v;
        }
        if let Some(v) = self.elastic_k {
            m.elastic_k = v;
        }
        if let Some(ms) = &self.muscles {
            let att = |a: &AttachmentSpec| Attachment { body: body(a.body), point: a.point };
            m.muscles = ms.iter().map(|s| Muscle { origin: att(&s.origin), insertion: att(&s.insertion) }).collect();
        }
        m
    }
}

fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Reads, validates and resolves a config file.
pub fn load(path: &Path, ov: &Overrides) -> Result<Experiment, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let cfg: ExperimentConfig =
        serde_json::from_slice(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let config_hash = hex::encode(Sha256::digest(&bytes));
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let kind = MapKind::parse(&cfg.data.kind).ok_or_else(|| usage(format!("data.kind must be \"al\" or \"atl\", got {:?}", cfg.data.kind)))?;
    let n_train = match &cfg.data.n_train {
        NTrain::One(n) => vec![*n],
        NTrain::Many(v) => v.clone(),
    };
    if n_train.is_empty() || n_train.contains(&0) {
        return Err(usage("data.n_train must be a positive integer or a non-empty list of them"));
    }
    let seeds = ov.seeds.clone().or_else(|| cfg.train.seeds.clone()).unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
    if seeds.is_empty() {
        return Err(usage("at least one seed is required"));
    }

    let t = &cfg.train;
    let defaults = if ov.full_scale {
        TrainConfig::full_scale(kind, LossConfig::basic())
    } else {
        TrainConfig::desk_scale(kind, LossConfig::basic())
    };
    let adam_default = AdamHyper::default();
    let base = TrainConfig {
        hidden: t.hidden.unwrap_or(defaults.hidden),
        epochs: t.epochs.unwrap_or(defaults.epochs),
        eval_stride: t.eval_stride.unwrap_or(defaults.eval_stride),
        tension_input_scale: t.tension_input_scale.unwrap_or(defaults.tension_input_scale),
        adam: AdamHyper {
            lr: t.adam.lr.unwrap_or(adam_default.lr),
            beta1: t.adam.beta1.unwrap_or(adam_default.beta1),
            beta2: t.adam.beta2.unwrap_or(adam_default.beta2),
            eps: t.adam.eps.unwrap_or(adam_default.eps),
        },
        ..defaults
    };
    base.validate().map_err(|e| usage(format!("train: {e}")))?;

    let alpha = cfg.losses.alpha;
    let configs = match &cfg.losses.configs {
        None => LossConfig::ablation_set(alpha).to_vec(),
        Some(names) => names
            .iter()
            .map(|n| LossConfig::parse(n, alpha).ok_or_else(|| usage(format!("unknown loss configuration {n:?}"))))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if configs.is_empty() {
        return Err(usage("losses.configs must not be empty"));
    }
    for c in &configs {
        c.validate().map_err(|e| usage(format!("losses: {e}")))?;
    }
    let alphas = cfg.losses.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    if alphas.is_empty() || alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(usage("losses.alphas must be a non-empty list of positive numbers"));
    }

    let (source, model) = match &cfg.data.csv {
        Some(csv) => {
            let csv = resolve(&base_dir, csv);
            let mut data = load_csv(&csv).map_err(CliError::from)?;
            data.kind = kind;
            if let Some(&n) = n_train.iter().find(|&&n| n >= data.len()) {
                return Err(usage(format!("n_train {n} leaves no evaluation data in {} ({} rows)", csv.display(), data.len())));
            }
            (DataSource::External(data), None)
        }
        None => {
            let model = cfg.model.build();
            model.validate().map_err(|e| usage(format!("model: {e}")))?;
            if cfg.data.eval_size == 0 {
                return Err(usage("data.eval_size must be at least 1"));
            }
            let src = DataSource::Simulated { model: model.clone(), kind, eval_size: cfg.data.eval_size, data_seed: cfg.data.seed };
            (src, Some(model))
        }
    };

    let output = match &ov.output {
        Some(o) => o.clone(),
        None => resolve(&base_dir, &cfg.output.directory),
    };

    Ok(Experiment {
        config_path: path.to_path_buf(),
        config_hash,
        kind,
        n_train,
        seeds,
        base,
        configs,
        alphas,
        source,
        model,
        data_seed: cfg.data.seed,
        output,
        full_scale: ov.full_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("cfg.json");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_config_takes_desk_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"data": {"kind": "al"}}"#);
        let e = load(&p, &Overrides::default()).unwrap();
        assert_eq!(e.n_train, vec![5]);
        assert_eq!(e.seeds, DEFAULT_SEEDS.to_vec());
        assert_eq!((e.base.hidden, e.base.epochs), (100, 5000));
        assert_eq!(e.configs.len(), 4);
        assert_eq!(e.output, dir.path().join("out"));
        assert_eq!(e.config_hash.len(), 64);
    }

    #[test]
    fn full_scale_only_changes_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"data": {"kind": "atl", "n_train": [5, 10]}, "train": {"epochs": 7}}"#);
        let ov = Overrides { full_scale: true, seeds: Some(vec![9]), ..Overrides::default() };
        let e = load(&p, &ov).unwrap();
        assert_eq!((e.base.hidden, e.base.epochs), (1000, 7));
        assert_eq!(e.seeds, vec![9]);
        assert_eq!(e.n_train, vec![5, 10]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        for text in [
            r#"{"data": {"kind": "al", "colour": 1}}"#,
            r#"{"data": {"kind": "xl"}}"#,
            r#"{"data": {"kind": "al"}, "losses": {"configs": ["Basic+Magic"]}}"#,
            r#"{"data": {"kind": "al", "n_train": 0}}"#,
            r#"{"data": {"kind": "al"}, "model": {"link_lengths": [-1.0, 0.3]}}"#,
            r#"{"data": {"kind": "al"}, "train": {"epochs": 0}}"#,
            r#"{"data": "#,
        ] {
            let p = write(dir.path(), text);
            assert!(matches!(load(&p, &Overrides::default()), Err(CliError::Usage(_))), "{text}");
        }
    }
}
