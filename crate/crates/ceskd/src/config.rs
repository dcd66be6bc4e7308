//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "desk"
//! seeds = [1, 2, 3]
//! method = "ceskd"
//! path = ["T10", "A8", "S4"]
//!
//! [data]
//! source = "synthetic"
//! classes = 10
//! dim = 16
//! n_train = 4000
//! n_test = 2000
//! hardness = 0.6
//! seed = 7
//!
//! [[models]]
//! name = "T10"
//! depth_tag = 10
//! arch = "mlp 128 128 128 128"
//! ```
//!
//! `arch` is either `mlp <hidden widths...>` or a `|`-separated layer list
//! such as `conv2d 1 8 3 1 1 | relu | maxpool2d 2 2 | flatten | dense 1568 10`.
//! Input shape and class count of `mlp` models come from the dataset.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use ceskd_core::data::AugmentConfig;
use ceskd_core::engine::{DistillationPath, Method, RunConfig};
use ceskd_core::loss::KdHyperparams;
use ceskd_core::nn::{LayerSpec, ModelSpec};
use ceskd_core::optim::StepSchedule;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum MethodName {
    #[serde(rename = "noKD")]
    #[value(name = "noKD", alias = "nokd")]
    NoKd,
    #[serde(rename = "blkd")]
    Blkd,
    #[serde(rename = "takd")]
    Takd,
    #[serde(rename = "dgkd")]
    Dgkd,
    #[serde(rename = "ceskd")]
    Ceskd,
}

impl MethodName {
    pub fn method(self) -> Method {
        match self {
            MethodName::NoKd => Method::NoKd,
            MethodName::Blkd => Method::Blkd,
            MethodName::Takd => Method::Takd,
            MethodName::Dgkd => Method::Dgkd,
            MethodName::Ceskd => Method::Ceskd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    #[default]
    Baseline,
    Anti,
    Random,
}

impl PolicyName {
    pub const ALL: [PolicyName; 3] = [PolicyName::Baseline, PolicyName::Anti, PolicyName::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Baseline => "baseline",
            PolicyName::Anti => "anti",
            PolicyName::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// The selection policy for a run seed; random draws from the seed's policy stream.
    pub fn policy(self, seed: u64) -> ceskd_core::curriculum::SelectionPolicy {
        ceskd_core::experiments::ablation_policies(seed)[self as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Synthetic {
        classes: usize,
        dim: usize,
        n_train: usize,
        n_test: usize,
        hardness: f64,
        seed: u64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Cifar10 {
        train: Vec<PathBuf>,
        test: Vec<PathBuf>,
    },
    /// Datasets previously written in the tensor container format.
    Container {
        train: PathBuf,
        test: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub depth_tag: u32,
    pub arch: String,
    /// Pretrained weights; only used for the first model of the path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentEntry {
    #[serde(default)]
    pub pad: usize,
    #[serde(default)]
    pub flip_prob: f64,
    #[serde(default)]
    pub jitter: f64,
}

fn default_epochs() -> usize {
    60
}
fn default_batch() -> usize {
    128
}
fn default_lr() -> f64 {
    0.1
}
fn default_factor() -> f64 {
    0.1
}
fn default_milestones() -> Vec<usize> {
    vec![12, 36, 48]
}
fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}
fn default_temperature() -> f64 {
    10.0
}
fn default_alpha() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_milestones")]
    pub milestones: Vec<usize>,
    #[serde(default = "default_factor")]
    pub lr_factor: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_true")]
    pub nesterov: bool,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentEntry>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        toml::from_str("").expect("every training key has a default")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    /// Reference model name; defaults to the first model of the path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer_milestones: Option<Vec<usize>>,
    #[serde(default)]
    pub scorer_seed: u64,
    #[serde(default = "default_true")]
    pub class_balanced: bool,
    #[serde(default)]
    pub policy: PolicyName,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        toml::from_str("").expect("every curriculum key has a default")
    }
}

fn default_expert_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisConfig {
    /// Expert model names, any order.
    pub experts: Vec<String>,
    pub student: String,
    #[serde(default = "default_expert_seed")]
    pub expert_seed: u64,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_method() -> MethodName {
    MethodName::Ceskd
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_method")]
    pub method: MethodName,
    pub path: Vec<String>,
    pub data: DataConfig,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisConfig>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Unknown keys are reported with the span of their table; point at the key.
fn error_line(text: &str, e: &toml::de::Error) -> Option<usize> {
    let span = e.span()?;
    let key = e
        .message()
        .strip_prefix("unknown field `")
        .and_then(|m| m.split('`').next());
    if let Some(key) = key {
        // tagged tables only carry the span of their header, so read on to the next one
        let start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
        let mut at = start;
        for (i, line) in text[start..].split_inclusive('\n').enumerate() {
            let t = line.trim_start();
            if i > 0 && at >= span.end && t.starts_with('[') {
                break;
            }
            if t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')) {
                return Some(line_of(text, at));
            }
            at += line.len();
        }
    }
    Some(line_of(text, span.start))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: error_line(text, &e),
        detail: e.message().trim().to_string(),
    })?;
    cfg.check().map_err(|detail| Error::Config {
        line: None,
        detail,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let bytes = crate::error::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::config(format!("{} is not UTF-8", path.display())))?;
    parse_config(&text)
}

pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configs always serialize")
}

/// Hidden widths or explicit layers of one architecture string.
pub fn parse_arch(arch: &str, input_shape: &[usize], classes: usize, depth_tag: u32) -> Result<ModelSpec> {
    let arch = arch.trim();
    if let Some(rest) = arch.strip_prefix("mlp") {
        if !rest.is_empty() && !rest.starts_with(' ') {
            return Err(Error::config(format!("bad architecture `{arch}`")));
        }
        let hidden = rest
            .split_whitespace()
            .map(str::parse::<usize>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(format!("bad hidden width in `{arch}`: {e}")))?;
        let flat = input_shape.iter().product();
        let mut layers = Vec::new();
        if input_shape.len() > 1 {
            layers.push(LayerSpec::Flatten);
        }
        let mlp = ModelSpec::mlp(flat, &hidden, classes, depth_tag)?;
        layers.extend(mlp.layers);
        return Ok(ModelSpec::new(input_shape.to_vec(), layers, depth_tag)?);
    }
    let layers = arch
        .split('|')
        .map(|l| l.trim().parse::<LayerSpec>())
        .collect::<ceskd_core::Result<Vec<_>>>()?;
    let spec = ModelSpec::new(input_shape.to_vec(), layers, depth_tag)?;
    if spec.num_classes() != classes {
        return Err(Error::config(format!(
            "architecture `{arch}` has {} outputs for {classes} classes",
            spec.num_classes()
        )));
    }
    Ok(spec)
}

impl ExperimentConfig {
    /// Consistency checks that need no data.
    fn check(&self) -> std::result::Result<(), String> {
        if self.seeds.is_empty() {
            return Err("`seeds` is empty".into());
        }
        if self.path.is_empty() {
            return Err("`path` is empty".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(format!("model `{}` is defined twice", m.name));
            }
        }
        let mut names: Vec<&String> = self.path.iter().collect();
        names.extend(self.curriculum.scorer.iter());
        if let Some(h) = &self.hypothesis {
            names.extend(h.experts.iter());
            names.push(&h.student);
        }
        if let Some(missing) = names.iter().find(|n| self.model(n).is_none()) {
            return Err(format!("model `{missing}` is used but not defined under [[models]]"));
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn spec(&self, name: &str, input_shape: &[usize], classes: usize) -> Result<ModelSpec> {
        let m = self
            .model(name)
            .ok_or_else(|| Error::config(format!("unknown model `{name}`")))?;
        parse_arch(&m.arch, input_shape, classes, m.depth_tag)
    }

    pub fn distillation_path(&self, input_shape: &[usize], classes: usize) -> Result<DistillationPath> {
        let specs = self
            .path
            .iter()
            .map(|n| self.spec(n, input_shape, classes))
            .collect::<Result<Vec<_>>>()?;
        Ok(DistillationPath::new(specs, self.method.method())?)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let t = &self.train;
        let cfg = RunConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            hp: KdHyperparams::new(t.temperature, t.alpha)?,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            nesterov: t.nesterov,
            schedule: StepSchedule::new(t.lr, t.milestones.clone(), t.lr_factor)?,
            seed: self.seeds[0],
            augment: t.augment.as_ref().map(|a| AugmentConfig {
                pad: a.pad,
                flip_prob: a.flip_prob,
                jitter: a.jitter,
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Training budget of the reference model that scores the dataset.
    pub fn scorer_config(&self) -> Result<RunConfig> {
        let mut cfg = self.run_config()?.with_seed(self.curriculum.scorer_seed);
        if let Some(e) = self.curriculum.scorer_epochs {
            cfg.epochs = e;
        }
        if let Some(m) = &self.curriculum.scorer_milestones {
            cfg.schedule = StepSchedule::new(cfg.schedule.initial, m.clone(), cfg.schedule.factor)?;
        }
        Ok(cfg)
    }

    pub fn scorer_name(&self) -> &str {
        self.curriculum.scorer.as_deref().unwrap_or(&self.path[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
path = ["big", "small"]

[data]
source = "synthetic"
classes = 3
dim = 4
n_train = 30
n_test = 12
hardness = 0.5
seed = 1

[[models]]
name = "big"
depth_tag = 2
arch = "mlp 8"

[[models]]
name = "small"
depth_tag = 1
arch = "mlp"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.train.alpha, 0.9);
        assert_eq!(cfg.train.temperature, 10.0);
        assert_eq!(cfg.method, MethodName::Ceskd);
        assert_eq!(cfg.curriculum.policy, PolicyName::Baseline);
        assert!(cfg.curriculum.class_balanced);
        assert_eq!(cfg.scorer_name(), "big");
        let run = cfg.run_config().unwrap();
        assert_eq!(run.hp, KdHyperparams::default());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = MINIMAL.replace("name = \"tiny\"", "name = \"tiny\"\n[train]\ntempratue = 4.0");
        let text = text.replacen("path = [\"big\", \"small\"]\n", "", 1);
        let text = format!("path = [\"big\", \"small\"]\n{text}");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tempratue"), "{msg}");
        match err {
            Error::Config { line: Some(l), .. } => assert_eq!(text.lines().nth(l - 1).unwrap().trim(), "tempratue = 4.0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_and_missing_keys_are_errors() {
        let err = parse_config(&MINIMAL.replace("dim = 4", "dim = \"four\"")).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(_), .. }), "{err}");
        let err = parse_config(&MINIMAL.replace("seed = 1\n", "")).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        let err = parse_config(&MINIMAL.replace("\"big\", \"small\"", "\"big\", \"tiny\"")).unwrap_err();
        assert!(err.to_string().contains("tiny"), "{err}");
    }

    #[test]
    fn serialization_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&to_toml(&cfg)).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(to_toml(&again), to_toml(&cfg));
    }

    #[test]
    fn architecture_strings() {
        let mlp = parse_arch("mlp 8 6", &[4], 3, 5).unwrap();
        assert_eq!(mlp, ModelSpec::mlp(4, &[8, 6], 3, 5).unwrap());
        let img = parse_arch("mlp 10", &[1, 2, 2], 3, 1).unwrap();
        assert_eq!(img.layers[0], LayerSpec::Flatten);
        let conv = parse_arch("conv2d 1 2 3 1 1 | relu | flatten | dense 8 3", &[1, 2, 2], 3, 1).unwrap();
        assert_eq!(conv.layers.len(), 4);
        assert!(parse_arch("conv2d 1 2 3 1 1 | relu | flatten | dense 8 4", &[1, 2, 2], 3, 1).is_err());
        assert!(parse_arch("mlpx 3", &[4], 3, 1).is_err());
        assert!(parse_arch("mlp 0", &[4], 3, 1).is_err());
    }
}
