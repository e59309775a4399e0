//! End-to-end experiments: learning the safe set, training with fixed
//! augmentation sets, fine-tuning, Cutout composition and subset-size sweeps.

mod baseline;
mod config;
mod metrics;
mod sweep;
mod trainer;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analyzer::{
    emit_report, evaluate_augmentation_accuracy, evaluate_clean_false_positives, refine_safe_set, select_safe_set,
    AnalyzerConfig, SafeSet, SafetyMetrics, SafetyReport, TaskAccuracies,
};
use crate::data::{load_dataset, save_checkpoint, Checkpoint, DataRequest, DatasetHandle, RunPaths, RunRegistry};
use crate::model::{ModelHandle, OptimizerState, Widths};
use crate::transform::{label_mapping, AugmentationSet, AugmentationSpec, SubsetMode, Transform, CATALOG_NAMES};
use crate::{Error, Result};

pub use baseline::{baseline_recipe, BaselineRecipe, BaselineStep};
pub use config::{dataset_task, AugmentationMode, ExperimentConfig, OptimizerKind, CONFIG_SCHEMA_VERSION};
pub use metrics::{mean_iou, top1_accuracy, IouCounts, TaskMetric};
pub use sweep::{render_sweep_figure, subset_size_sweep, SweepRow, SweepTable};
pub use trainer::{augment_batch, evaluate, fit, AugmentationPlan, EpochLog, FitLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

/// Everything needed to understand and re-run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub kind: String,
    pub run_id: Option<String>,
    pub parent_run: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub model: String,
    pub mode: String,
    pub mapping: Vec<String>,
    /// What the training pipeline applied.
    pub augmentations: Vec<String>,
    pub safe_set: Option<Vec<String>>,
    pub epochs: Vec<EpochLog>,
    pub stopped_early: bool,
    pub final_lr: f64,
    pub test_metric: Option<TaskMetric>,
    pub checkpoint: Option<PathBuf>,
    pub wall_time_s: f64,
    pub status: RunStatus,
    pub notes: Vec<String>,
}

impl ExperimentRecord {
    /// Test metric in percent, or NaN for runs that did not finish.
    pub fn metric(&self) -> f64 {
        self.test_metric.as_ref().map_or(f64::NAN, |m| m.percent)
    }
}

/// A finished training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: ExperimentRecord,
    pub checkpoint: Checkpoint,
    pub paths: Option<RunPaths>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnSafeOutcome {
    pub safe_set: SafeSet,
    pub metrics: SafetyMetrics,
    pub report: SafetyReport,
    pub run: RunOutcome,
}

/// Loads the dataset named by the config.
pub fn load_data(config: &ExperimentConfig) -> Result<DatasetHandle> {
    let mut req = DataRequest::new(&config.dataset, config.seed);
    req.root = config.data_root.clone();
    req.subset_size = config.subset_size;
    req.probe_samples = config.probe_samples;
    req.probe_size = config.probe_size;
    load_dataset(&req)
}

pub fn build_model(config: &ExperimentConfig, data: &DatasetHandle) -> Result<ModelHandle> {
    ModelHandle::with_widths(
        config.backbone()?,
        data.input,
        data.classes,
        Widths {
            first: config.width_first,
            second: config.width_second,
        },
        config.seed,
    )
}

/// The catalog at default magnitudes for this dataset, with probability
/// `p`. Crops that would exceed the image are capped at the image size.
pub fn dataset_catalog(data: &DatasetHandle, p: f64) -> Result<(AugmentationSet, Vec<String>)> {
    let (h, w) = (data.input.height, data.input.width);
    let mut notes = Vec::new();
    let specs = CATALOG_NAMES
        .iter()
        .map(|name| {
            let mut t = Transform::default_for(name, h, w)?;
            if data.name == "cityscapes" {
                let side = 512.min(h).min(w);
                if side < 512 {
                    notes.push(format!("{name}: 512x512 crop capped at {side}x{side}"));
                }
                t = match t {
                    Transform::RandomCrop { .. } => Transform::RandomCrop { height: side, width: side },
                    Transform::CenterCrop { .. } => Transform::CenterCrop { height: side, width: side },
                    Transform::RandomSizedCrop { max_height, w2h_ratio, .. } => Transform::RandomSizedCrop {
                        min_height: side.min(max_height),
                        max_height,
                        height: side,
                        width: side,
                        w2h_ratio,
                    },
                    other => other,
                };
            }
            Ok(AugmentationSpec::new(t, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((AugmentationSet::new(specs)?, notes))
}

fn analyzer_config(config: &ExperimentConfig) -> AnalyzerConfig {
    AnalyzerConfig {
        batch_size: config.eval_batch_size,
        rounds: config.eval_rounds,
        decision_threshold: config.decision_threshold,
        max_subset_size: config.learn_max_subset,
        seed: config.seed,
    }
}

struct RunSpec<'a> {
    kind: &'a str,
    mode: String,
    plan: AugmentationPlan,
    parent: Option<String>,
    notes: Vec<String>,
}

fn registry(config: &ExperimentConfig) -> Option<RunRegistry> {
    config.out.as_ref().map(RunRegistry::new)
}

fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

/// Trains `model` under `spec`, evaluates on the test split and persists
/// the run when the config names a registry.
fn execute(
    config: &ExperimentConfig,
    data: &DatasetHandle,
    mut model: ModelHandle,
    mut opt: OptimizerState,
    first_epoch: usize,
    spec: RunSpec<'_>,
) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let hash = config.hash();
    let paths = registry(config).map(|r| r.create(spec.kind, &hash)).transpose()?;
    if let Some(p) = &paths {
        config.save(&p.config)?;
    }
    let run_id = paths
        .as_ref()
        .and_then(|p| p.dir.file_name())
        .map(|n| n.to_string_lossy().into_owned());
    let mut record = ExperimentRecord {
        kind: spec.kind.to_string(),
        run_id,
        parent_run: spec.parent,
        config_hash: hash.clone(),
        seed: config.seed,
        dataset: data.name.clone(),
        model: model.backbone.name().to_string(),
        mode: spec.mode,
        mapping: label_mapping(),
        augmentations: spec.plan.describe(),
        safe_set: None,
        epochs: Vec::new(),
        stopped_early: false,
        final_lr: opt.lr,
        test_metric: None,
        checkpoint: None,
        wall_time_s: 0.0,
        status: RunStatus::Completed,
        notes: data.notes.iter().cloned().chain(spec.notes).collect(),
    };
    match fit(&mut model, &mut opt, data, &spec.plan, config, first_epoch) {
        Ok(log) => {
            record.epochs = log.epochs;
            record.stopped_early = log.stopped_early;
        }
        Err(e @ Error::Diverged { .. }) => {
            record.status = RunStatus::Diverged;
            record.notes.push(e.to_string());
            record.wall_time_s = start.elapsed().as_secs_f64();
            if let Some(p) = &paths {
                write_json(&p.record, &record)?;
            }
            return Err(e);
        }
        Err(e) => return Err(e),
    }
    record.final_lr = opt.lr;
    record.test_metric = Some(evaluate(&model, &data.test, &data.stats, config.eval_batch_size)?);
    let epochs_done = first_epoch + record.epochs.len();
    let checkpoint = Checkpoint::new(model, Some(opt), &hash, epochs_done);
    if let Some(p) = &paths {
        save_checkpoint(&p.checkpoint, &checkpoint)?;
        record.checkpoint = Some(p.checkpoint.clone());
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(p) = &paths {
        write_json(&p.record, &record)?;
    }
    Ok(RunOutcome {
        record,
        checkpoint,
        paths,
    })
}

fn fresh(config: &ExperimentConfig, data: &DatasetHandle) -> Result<(ModelHandle, OptimizerState)> {
    let model = build_model(config, data)?;
    let spec = config.optimizer_spec();
    spec.validate()?;
    let opt = OptimizerState::new(spec, model.params.len());
    Ok((model, opt))
}

/// Fixed-size subsets of `k`, capped at the set size.
fn fixed_plan(config: &ExperimentConfig, set: &AugmentationSet, notes: &mut Vec<String>) -> AugmentationPlan {
    let k = config.k.min(set.len());
    if k < config.k {
        notes.push(format!("k={} capped at the set size {}", config.k, set.len()));
    }
    AugmentationPlan {
        set: Some(set.clone()),
        subset: SubsetMode::FixedSize { k },
        p: config.p,
        ..AugmentationPlan::none()
    }
}

/// Steps 1 to 4: joint training on random catalog subsets (size uniform in
/// `0..=learn_max_subset`, every sampled transform applied), then clean-set
/// false positives, augmented-set accuracy and threshold selection.
pub fn learn_safe(config: &ExperimentConfig, data: &DatasetHandle) -> Result<LearnSafeOutcome> {
    let (set, notes) = dataset_catalog(data, 1.0)?;
    let (model, opt) = fresh(config, data)?;
    let plan = AugmentationPlan {
        set: Some(set.clone()),
        subset: SubsetMode::RandomSize {
            max: config.learn_max_subset,
        },
        p: 1.0,
        joint: true,
        ..AugmentationPlan::none()
    };
    let spec = RunSpec {
        kind: "learn-safe",
        mode: "all(joint)".into(),
        plan,
        parent: None,
        notes,
    };
    let mut run = execute(config, data, model, opt, 0, spec)?;
    let model = &run.checkpoint.model;
    let acfg = analyzer_config(config);
    let clean = evaluate_clean_false_positives(model, &data.test.images, &data.stats, data.input, &acfg)?;
    let aug = evaluate_augmentation_accuracy(model, &data.test.images, &data.stats, data.input, &set, &acfg)?;
    let metrics = SafetyMetrics::from_evaluations(&clean, &aug);
    let mut safe_set = select_safe_set(&metrics, config.thresholds())?;
    safe_set.provenance.run_id = run.record.run_id.clone();
    let task_accuracy = if config.per_augmentation_accuracy {
        Some(per_augmentation_task_accuracy(config, data)?)
    } else {
        None
    };
    let report = SafetyReport::new(&data.name, &metrics, &safe_set, task_accuracy);
    run.record.safe_set = Some(safe_set.members.clone());
    if let Some(p) = &run.paths {
        emit_report(&report, &p.report, Some(&p.figure))?;
        safe_set
            .to_augmentation_set(data.input.height, data.input.width, config.p)?
            .save(&p.safe_set)?;
        write_json(&p.record, &run.record)?;
    }
    Ok(LearnSafeOutcome {
        safe_set,
        metrics,
        report,
        run,
    })
}

/// Trains the task head only. Each batch samples a fixed-size subset of
/// `set` (`k` capped at the set size) and fires each member with
/// probability `p`. `None` trains without augmentation.
pub fn train_with_set(config: &ExperimentConfig, data: &DatasetHandle, set: Option<&AugmentationSet>) -> Result<RunOutcome> {
    let (model, opt) = fresh(config, data)?;
    let mut notes = Vec::new();
    let (plan, mode) = match set {
        Some(s) => (fixed_plan(config, s, &mut notes), format!("set[{}]", s.names().join(","))),
        None => (AugmentationPlan::none(), "none".into()),
    };
    execute(
        config,
        data,
        model,
        opt,
        0,
        RunSpec {
            kind: "train",
            mode,
            plan,
            parent: None,
            notes,
        },
    )
}

/// Trains with the dataset's conventional baseline recipe.
pub fn train_baseline(config: &ExperimentConfig, data: &DatasetHandle) -> Result<RunOutcome> {
    let (model, opt) = fresh(config, data)?;
    let plan = AugmentationPlan {
        baseline: Some(baseline_recipe(&data.name, data.input.height)?),
        ..AugmentationPlan::none()
    };
    execute(
        config,
        data,
        model,
        opt,
        0,
        RunSpec {
            kind: "train",
            mode: "baseline".into(),
            plan,
            parent: None,
            notes: Vec::new(),
        },
    )
}

/// Baseline recipe, then a `k`-subset of `safe`, then Cutout of
/// `config.cutout` pixels (0 disables it).
pub fn train_combined(config: &ExperimentConfig, data: &DatasetHandle, safe: &AugmentationSet) -> Result<RunOutcome> {
    let (model, opt) = fresh(config, data)?;
    let mut notes = Vec::new();
    let mut plan = fixed_plan(config, safe, &mut notes);
    plan.baseline = Some(baseline_recipe(&data.name, data.input.height)?);
    plan.cutout = config.cutout;
    execute(
        config,
        data,
        model,
        opt,
        0,
        RunSpec {
            kind: "train",
            mode: "safe+baseline+cutout".into(),
            plan,
            parent: None,
            notes,
        },
    )
}

/// Continues training `parent` on `set` with the same `k` and `p`. The
/// learning rate resumes at the parent's final rate unless
/// `config.finetune_lr` is set.
pub fn finetune(config: &ExperimentConfig, data: &DatasetHandle, parent: &Checkpoint, set: &AugmentationSet) -> Result<RunOutcome> {
    let model = parent.model.clone();
    if model.input != data.input || model.classes != data.classes {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint expects {} inputs and {} classes, dataset has {} and {}",
            model.input, model.classes, data.input, data.classes
        )));
    }
    let mut opt = match &parent.optimizer {
        Some(o) => o.clone(),
        None => OptimizerState::new(config.optimizer_spec(), model.params.len()),
    };
    if let Some(lr) = config.finetune_lr {
        opt.lr = lr;
    }
    let mut notes = Vec::new();
    let plan = fixed_plan(config, set, &mut notes);
    execute(
        config,
        data,
        model,
        opt,
        parent.epoch,
        RunSpec {
            kind: "finetune",
            mode: format!("finetune[{}]", set.names().join(",")),
            plan,
            parent: Some(parent.config_hash.clone()),
            notes,
        },
    )
}

/// Resolves the safe-set file named by the config, at the dataset's
/// default magnitudes and probability `p`.
pub fn load_safe_set(config: &ExperimentConfig, data: &DatasetHandle) -> Result<AugmentationSet> {
    let path = config
        .safe_set
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(vec![format!("safe_set: mode `{}` needs a safe-set file", config.mode.name())]))?;
    let stored = AugmentationSet::load(path)?;
    let (catalog, _) = dataset_catalog(data, config.p)?;
    catalog.restrict(&stored.names())
}

/// Runs the training row selected by `config.mode`. `safe` overrides the
/// safe-set file.
pub fn run_mode(config: &ExperimentConfig, data: &DatasetHandle, safe: Option<&AugmentationSet>) -> Result<RunOutcome> {
    config.validate()?;
    let safe_set = || -> Result<AugmentationSet> {
        match safe {
            Some(s) => Ok(s.clone()),
            None => load_safe_set(config, data),
        }
    };
    match config.mode {
        AugmentationMode::None => train_with_set(config, data, None),
        AugmentationMode::Baseline => train_baseline(config, data),
        AugmentationMode::All => train_with_set(config, data, Some(&dataset_catalog(data, config.p)?.0)),
        AugmentationMode::Safe => train_with_set(config, data, Some(&safe_set()?)),
        AugmentationMode::SafeV2 => {
            let s = safe_set()?;
            let kept: Vec<String> = s.names().into_iter().filter(|n| !config.exclusions.contains(n)).collect();
            train_with_set(config, data, Some(&s.restrict(&kept)?))
        }
        AugmentationMode::SafeBaselineCutout => train_combined(config, data, &safe_set()?),
    }
}

/// `config.repeats` runs of [`run_mode`] with seeds `seed, seed+1, ...`,
/// plus their mean test metric.
pub fn run_repeats(config: &ExperimentConfig, data: &DatasetHandle, safe: Option<&AugmentationSet>) -> Result<(Vec<RunOutcome>, f64)> {
    let mut runs = Vec::with_capacity(config.repeats);
    for r in 0..config.repeats.max(1) {
        let cfg = ExperimentConfig {
            seed: config.seed + r as u64,
            ..config.clone()
        };
        runs.push(run_mode(&cfg, data, safe)?);
    }
    let mean = runs.iter().map(|r| r.record.metric()).sum::<f64>() / runs.len() as f64;
    Ok((runs, mean))
}

/// Removes `exclusions` from a learned safe set (e.g. conflicting crops).
pub fn safe_v2(safe: &SafeSet, exclusions: &[String]) -> (SafeSet, Vec<String>) {
    refine_safe_set(safe, exclusions)
}

/// Task accuracy of one model per single augmentation (`k = 1`, probability
/// `p`) and of one model without augmentation. Registry output is skipped.
pub fn per_augmentation_task_accuracy(config: &ExperimentConfig, data: &DatasetHandle) -> Result<TaskAccuracies> {
    let cfg = ExperimentConfig {
        out: None,
        k: 1,
        ..config.clone()
    };
    let (catalog, _) = dataset_catalog(data, config.p)?;
    let without = train_with_set(&cfg, data, None)?;
    let mut per = Vec::with_capacity(catalog.len());
    for name in catalog.names() {
        let single = catalog.restrict(&[name.as_str()])?;
        per.push((name, train_with_set(&cfg, data, Some(&single))?.record.metric()));
    }
    let metric = without.record.test_metric.as_ref().map_or("top1".into(), |m| m.name.clone());
    Ok(TaskAccuracies {
        metric,
        without_augmentation: without.record.metric(),
        per_augmentation: per,
    })
}
