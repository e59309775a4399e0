use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::{AccuracyKind, Thresholds};
use crate::model::{Backbone, OptimizerSpec, TaskKind};
use crate::transform::NUM_TRANSFORMS;
use crate::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Which augmentations a training run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentationMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "safe")]
    Safe,
    #[serde(rename = "all")]
    All,
    /// The safe set minus `exclusions`.
    #[serde(rename = "safe_v2")]
    SafeV2,
    #[serde(rename = "safe+baseline+cutout")]
    SafeBaselineCutout,
}

impl AugmentationMode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "none" | "without" => Self::None,
            "baseline" => Self::Baseline,
            "safe" => Self::Safe,
            "all" => Self::All,
            "safe_v2" | "safe-v2" => Self::SafeV2,
            "safe+baseline+cutout" | "combined" => Self::SafeBaselineCutout,
            other => return Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Baseline => "baseline",
            Self::Safe => "safe",
            Self::All => "all",
            Self::SafeV2 => "safe_v2",
            Self::SafeBaselineCutout => "safe+baseline+cutout",
        }
    }

    pub fn needs_safe_set(&self) -> bool {
        matches!(self, Self::Safe | Self::SafeV2 | Self::SafeBaselineCutout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// One flat, human-editable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,

    pub dataset: String,
    pub data_root: Option<PathBuf>,
    pub subset_size: Option<usize>,
    pub seed: u64,
    /// Image count and side length for the synthetic datasets.
    pub probe_samples: usize,
    pub probe_size: usize,

    pub model: String,
    pub width_first: usize,
    pub width_second: usize,

    pub mode: AugmentationMode,
    pub k: usize,
    pub p: f64,
    /// Largest random subset while learning which augmentations are safe.
    pub learn_max_subset: usize,
    /// Cutout side in pixels; 0 disables it.
    pub cutout: usize,
    /// Transforms removed from the safe set for `safe_v2`.
    pub exclusions: Vec<String>,
    /// Catalog file with the safe set, for modes that need one.
    pub safe_set: Option<PathBuf>,

    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    /// Learning rate when fine-tuning; unset continues from the
    /// checkpoint's final rate.
    pub finetune_lr: Option<f64>,

    pub fp_max: f64,
    pub acc_max: f64,
    pub decision_threshold: f64,
    /// Step-3 statistic compared against `acc_max`.
    pub accuracy: AccuracyKind,
    pub eval_batch_size: usize,
    /// Passes over the test set for augmented-set accuracy.
    pub eval_rounds: usize,
    /// Train one model per augmentation to report task accuracy next to
    /// the safety metrics. Expensive.
    pub per_augmentation_accuracy: bool,

    pub repeats: usize,
    pub workers: usize,
    pub sweep_sizes: Vec<usize>,
    /// Run registry root; unset keeps everything in memory.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            dataset: "probe".into(),
            data_root: None,
            subset_size: None,
            seed: 0,
            probe_samples: 5000,
            probe_size: 16,
            model: "tiny".into(),
            width_first: 8,
            width_second: 16,
            mode: AugmentationMode::Safe,
            k: 3,
            p: 0.5,
            learn_max_subset: 5,
            cutout: 0,
            exclusions: Vec::new(),
            safe_set: None,
            optimizer: OptimizerKind::Sgd,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 10,
            batch_size: 64,
            plateau_factor: 0.1,
            plateau_patience: 10,
            early_stop_patience: 20,
            finetune_lr: None,
            fp_max: t.fp_max,
            acc_max: t.acc_max,
            decision_threshold: t.decision_threshold,
            accuracy: t.accuracy,
            eval_batch_size: 32,
            eval_rounds: 1,
            per_augmentation_accuracy: false,
            repeats: 1,
            workers: 1,
            sweep_sizes: (0..=5).collect(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Dataset-keyed defaults: SGD recipe for classification, Adam recipe
    /// for segmentation, Cutout side 16 (CIFAR) or 20 (SVHN).
    pub fn for_dataset(name: &str) -> Self {
        let mut c = Self {
            dataset: name.to_string(),
            ..Self::default()
        };
        match name {
            "seg-probe" | "cityscapes" => {
                c.model = "tiny-seg".into();
                c.optimizer = OptimizerKind::Adam;
                c.lr = 1e-4;
                c.momentum = 0.0;
                c.weight_decay = 0.0;
                c.plateau_factor = 0.5;
                c.plateau_patience = 7;
                c.early_stop_patience = 15;
                c.batch_size = 16;
            }
            "probe" => {
                c.optimizer = OptimizerKind::Adam;
                c.lr = 2e-3;
                c.momentum = 0.0;
                c.weight_decay = 0.0;
                c.batch_size = 8;
                c.width_first = 16;
                c.width_second = 32;
                c.eval_rounds = 10;
            }
            "cifar10" | "cifar100" => c.cutout = 16,
            "svhn" => c.cutout = 20,
            _ => {}
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text)?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: c.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical TOML rendering, in hex.
    pub fn hash(&self) -> String {
        let text = self.to_toml().expect("config always serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn backbone(&self) -> Result<Backbone> {
        Backbone::parse(&self.model)
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            fp_max: self.fp_max,
            acc_max: self.acc_max,
            decision_threshold: self.decision_threshold,
            accuracy: self.accuracy,
        }
    }

    pub fn optimizer_spec(&self) -> OptimizerSpec {
        match self.optimizer {
            OptimizerKind::Sgd => OptimizerSpec::Sgd {
                lr: self.lr,
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            },
            OptimizerKind::Adam => OptimizerSpec::Adam {
                lr: self.lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: self.weight_decay,
            },
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut unit = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                bad.push(format!("{name}: {v} is outside [0, 1]"));
            }
        };
        unit("p", self.p);
        unit("fp_max", self.fp_max);
        unit("acc_max", self.acc_max);
        unit("decision_threshold", self.decision_threshold);
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            bad.push(format!("plateau_factor: {} must lie in (0, 1]", self.plateau_factor));
        }
        if self.k > NUM_TRANSFORMS {
            bad.push(format!("k: {} exceeds the {NUM_TRANSFORMS} catalog transforms", self.k));
        }
        if self.learn_max_subset > NUM_TRANSFORMS {
            bad.push(format!("learn_max_subset: {} exceeds {NUM_TRANSFORMS}", self.learn_max_subset));
        }
        if let Some(s) = self.sweep_sizes.iter().find(|&&s| s > NUM_TRANSFORMS) {
            bad.push(format!("sweep_sizes: {s} exceeds {NUM_TRANSFORMS}"));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("eval_batch_size", self.eval_batch_size),
            ("eval_rounds", self.eval_rounds),
            ("repeats", self.repeats),
            ("workers", self.workers),
            ("width_first", self.width_first),
            ("width_second", self.width_second),
            ("probe_size", self.probe_size),
        ] {
            if v == 0 {
                bad.push(format!("{name}: must be positive"));
            }
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            bad.push(format!("lr: {} must be finite and non-negative", self.lr));
        }
        if let Some(lr) = self.finetune_lr {
            if !(lr.is_finite() && lr >= 0.0) {
                bad.push(format!("finetune_lr: {lr} must be finite and non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            bad.push(format!("momentum: {} must lie in [0, 1)", self.momentum));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            bad.push(format!("weight_decay: {} must be non-negative", self.weight_decay));
        }
        if self.subset_size == Some(0) {
            bad.push("subset_size: must be positive when set".into());
        }
        match self.backbone() {
            Ok(b) => {
                let task = dataset_task(&self.dataset);
                if let Some(task) = task {
                    if b.task() != task {
                        bad.push(format!("model: `{}` does not fit the {task:?} dataset `{}`", self.model, self.dataset));
                    }
                } else {
                    bad.push(format!("dataset: unknown dataset `{}`", self.dataset));
                }
            }
            Err(e) => bad.push(format!("model: {e}")),
        }
        if self.mode == AugmentationMode::SafeBaselineCutout && self.cutout == 0 {
            bad.push("cutout: must be positive for mode safe+baseline+cutout".into());
        }
        if self.mode == AugmentationMode::SafeV2 && self.exclusions.is_empty() {
            bad.push("exclusions: mode safe_v2 needs at least one excluded transform".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

pub fn dataset_task(name: &str) -> Option<TaskKind> {
    match name {
        "probe" | "cifar10" | "cifar100" | "svhn" | "tiny-imagenet" => Some(TaskKind::Classification),
        "seg-probe" | "cityscapes" => Some(TaskKind::Segmentation),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        let c = ExperimentConfig::for_dataset("cifar10");
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = ExperimentConfig {
            p: 1.5,
            k: 16,
            batch_size: 0,
            ..ExperimentConfig::default()
        };
        match c.validate() {
            Err(Error::InvalidConfig(v)) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v[0].starts_with("p:"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_toml("schema_version = 1\nlearning_rate = 3\n").is_err());
        assert!(matches!(
            ExperimentConfig::from_toml("schema_version = 2\n"),
            Err(Error::SchemaVersion { found: 2, .. })
        ));
    }

    #[test]
    fn segmentation_defaults() {
        let c = ExperimentConfig::for_dataset("seg-probe");
        assert_eq!(c.optimizer_spec(), OptimizerSpec::adam_default());
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::for_dataset("svhn").cutout, 20);
    }
}
