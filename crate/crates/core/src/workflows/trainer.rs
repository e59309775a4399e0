use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::baseline::BaselineRecipe;
use super::config::ExperimentConfig;
use super::metrics::{top1_accuracy, IouCounts, TaskMetric};
use crate::data::{masks_to_input, to_tensor, DatasetHandle, NormStats, Split, Targets};
use crate::model::{
    argmax_predictions, train_step, AugTargets, JointBatch, ModelHandle, OptimizerState, TaskKind, TaskTargets,
};
use crate::rng;
use crate::transform::{
    apply_cutout, apply_pipeline_batch, sample_subset, AugmentationLabelVector, AugmentationSet, Image, Mask,
    SubsetMode,
};
use crate::{Error, Result};

/// How each training batch is augmented, in application order: baseline
/// recipe, a sampled subset of `set`, then Cutout.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub baseline: Option<BaselineRecipe>,
    pub set: Option<AugmentationSet>,
    pub subset: SubsetMode,
    pub p: f64,
    pub cutout: usize,
    /// Train the augmentation head on the fired-transform labels too.
    pub joint: bool,
}

impl AugmentationPlan {
    pub fn none() -> Self {
        Self {
            baseline: None,
            set: None,
            subset: SubsetMode::FixedSize { k: 0 },
            p: 0.0,
            cutout: 0,
            joint: false,
        }
    }

    /// Names of every transform the plan may apply.
    pub fn describe(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(b) = &self.baseline {
            out.push(format!("baseline({})", b.dataset));
        }
        if let Some(s) = &self.set {
            out.extend(s.names());
        }
        if self.cutout > 0 {
            out.push(format!("Cutout({})", self.cutout));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_augm: Option<f64>,
    pub l_task: f64,
    pub l_total: f64,
    pub lr: f64,
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitLog {
    pub epochs: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// Applies the plan to one batch. Every stage has its own random stream
/// keyed by `(epoch, batch)`.
pub fn augment_batch(
    images: &[Image],
    masks: Option<&[Mask]>,
    plan: &AugmentationPlan,
    stats: &NormStats,
    seed: u64,
    epoch: usize,
    batch: usize,
) -> Result<(Vec<Image>, Option<Vec<Mask>>, AugmentationLabelVector)> {
    let ids = |stage: &str| [rng::tag(stage), epoch as u64, batch as u64];
    let mut images = images.to_vec();
    let mut masks = masks.map(<[Mask]>::to_vec);
    if let Some(recipe) = &plan.baseline {
        let mut r = rng::derive(seed, &ids("baseline"));
        let mut new_masks = masks.as_ref().map(|m| Vec::with_capacity(m.len()));
        for (i, img) in images.iter_mut().enumerate() {
            let (out, m) = recipe.apply(img, masks.as_ref().map(|m| &m[i]), &mut r)?;
            *img = out;
            if let (Some(nm), Some(m)) = (new_masks.as_mut(), m) {
                nm.push(m);
            }
        }
        masks = new_masks;
    }
    let mut labels = AugmentationLabelVector::zeros();
    if let Some(set) = plan.set.as_ref().filter(|s| !s.is_empty()) {
        let mut r = rng::derive(seed, &ids("subset"));
        let subset = sample_subset(set, plan.subset, &mut r)?;
        let out = apply_pipeline_batch(&images, masks.as_deref(), set, &subset, plan.p, &mut r)?;
        images = out.images;
        masks = out.masks;
        labels = out.labels;
    }
    if plan.cutout > 0 {
        let mut r = rng::derive(seed, &ids("cutout"));
        let fill = stats.fill();
        for img in images.iter_mut() {
            *img = apply_cutout(img, plan.cutout, &fill, &mut r)?;
        }
    }
    Ok((images, masks, labels))
}

fn task_targets(split: &Split, idx: &[usize], data: &DatasetHandle, masks: Option<&[Mask]>) -> TaskTargets {
    match &split.targets {
        Targets::Classes(l) => TaskTargets::Classes(idx.iter().map(|&i| l[i]).collect()),
        Targets::Masks(_) => JointBatch::masks_from(&masks_to_input(masks.expect("segmentation batch has masks"), data.input)),
    }
}

/// Top-1 accuracy or mean IoU (percent) of `model` on `split`.
pub fn evaluate(model: &ModelHandle, split: &Split, stats: &NormStats, batch_size: usize) -> Result<TaskMetric> {
    if split.is_empty() {
        return Err(Error::EmptyDataset("evaluation split is empty".into()));
    }
    let kind = match &split.targets {
        Targets::Classes(_) => TaskKind::Classification,
        Targets::Masks(_) => TaskKind::Segmentation,
    };
    if kind != model.task() {
        return Err(Error::TaskMismatch(format!(
            "{:?} split scored with a {:?} model",
            kind,
            model.task()
        )));
    }
    let mut preds = Vec::with_capacity(split.len());
    let mut iou = IouCounts::new(model.classes);
    for (b, chunk) in split.images.chunks(batch_size.max(1)).enumerate() {
        let x = to_tensor(chunk, stats, model.input)?;
        let out = model.forward(&x)?;
        let p = argmax_predictions(&out.task, model.classes);
        if let Targets::Masks(m) = &split.targets {
            let start = b * batch_size.max(1);
            let truth = masks_to_input(&m[start..start + chunk.len()], model.input);
            let flat: Vec<u8> = truth.iter().flat_map(|m| m.data().iter().copied()).collect();
            iou.add(&p, &flat, Mask::IGNORE)?;
        } else {
            preds.extend(p);
        }
    }
    match &split.targets {
        Targets::Classes(l) => top1_accuracy(&preds, l),
        Targets::Masks(_) => iou.mean(),
    }
}

/// Mini-batch training with plateau LR decay and early stopping, both
/// driven by the validation metric (training loss when there is no
/// validation split). `first_epoch` offsets the random streams so a
/// continued run never replays earlier batches.
pub fn fit(
    model: &mut ModelHandle,
    opt: &mut OptimizerState,
    data: &DatasetHandle,
    plan: &AugmentationPlan,
    config: &ExperimentConfig,
    first_epoch: usize,
) -> Result<FitLog> {
    if data.train.is_empty() {
        return Err(Error::EmptyDataset(format!("{}: empty train split", data.name)));
    }
    let mut log = FitLog::default();
    let mut best = f64::NEG_INFINITY;
    let mut bad_epochs = 0usize;
    let mut since_best = 0usize;
    for e in 0..config.epochs {
        let epoch = first_epoch + e;
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut rng::derive(config.seed, &[rng::tag("order"), epoch as u64]));
        let (mut sa, mut st, mut stot, mut has_aug) = (0.0, 0.0, 0.0, false);
        let mut batches = 0usize;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let images: Vec<Image> = idx.iter().map(|&i| data.train.images[i].clone()).collect();
            let masks: Option<Vec<Mask>> = data.train.masks().map(|m| idx.iter().map(|&i| m[i].clone()).collect());
            let (images, masks, labels) =
                augment_batch(&images, masks.as_deref(), plan, &data.stats, config.seed, epoch, b)?;
            let batch = JointBatch {
                images: to_tensor(&images, &data.stats, data.input)?,
                aug_labels: plan.joint.then_some(AugTargets::PerBatch(labels)),
                task: task_targets(&data.train, idx, data, masks.as_deref()),
            };
            let losses = train_step(model, &batch, opt).map_err(|e| match e {
                Error::NonFiniteLoss { l_augm, l_task } => Error::Diverged {
                    epoch,
                    reason: format!("non-finite loss at batch {b} (augmentation {l_augm}, task {l_task})"),
                },
                other => other,
            })?;
            if let Some(a) = losses.l_augm {
                sa += a;
                has_aug = true;
            }
            st += losses.l_task;
            stot += losses.l_total;
            batches += 1;
        }
        let n = batches as f64;
        let val_metric = if data.val.is_empty() {
            None
        } else {
            Some(evaluate(model, &data.val, &data.stats, config.eval_batch_size)?.percent)
        };
        log.epochs.push(EpochLog {
            epoch,
            l_augm: has_aug.then_some(sa / n),
            l_task: st / n,
            l_total: stot / n,
            lr: opt.lr,
            val_metric,
        });
        let monitored = val_metric.unwrap_or(-stot / n);
        // Relative improvement threshold of 1e-4, as in the usual plateau rule.
        let improved = if best.is_finite() {
            monitored > best + 1e-4 * best.abs()
        } else {
            true
        };
        if improved {
            best = monitored;
            bad_epochs = 0;
            since_best = 0;
        } else {
            bad_epochs += 1;
            since_best += 1;
            if bad_epochs > config.plateau_patience {
                opt.lr *= config.plateau_factor;
                bad_epochs = 0;
            }
            if since_best >= config.early_stop_patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok(log)
}
