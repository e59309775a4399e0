use serde::{Deserialize, Serialize};

use super::loss::{
    augmentation_loss_with_grad, classification_loss_with_grad, segmentation_loss_with_grad, total_loss, LossValue,
};
use super::net::{ModelHandle, TaskKind, TaskLogits};
use super::optim::OptimizerState;
use super::tensor::Tensor;
use crate::transform::{AugmentationLabelVector, Mask, NUM_TRANSFORMS};
use crate::{Error, Result};

/// Augmentation targets for a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum AugTargets {
    /// One label vector shared by every item (the subset is drawn per batch).
    PerBatch(AugmentationLabelVector),
    PerItem(Vec<AugmentationLabelVector>),
}

impl AugTargets {
    fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            AugTargets::PerBatch(l) => Ok((0..n).flat_map(|_| l.as_f64()).collect()),
            AugTargets::PerItem(ls) => {
                if ls.len() != n {
                    return Err(Error::ShapeMismatch(format!("{} aug labels for {n} images", ls.len())));
                }
                Ok(ls.iter().flat_map(|l| l.as_f64()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskTargets {
    Classes(Vec<usize>),
    /// Flattened `n×h×w` masks.
    Masks(Vec<u8>),
}

/// A normalized batch with its targets. Without `aug_labels` only the task
/// loss is optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBatch {
    pub images: Tensor,
    pub aug_labels: Option<AugTargets>,
    pub task: TaskTargets,
}

impl JointBatch {
    pub fn masks_from(masks: &[Mask]) -> TaskTargets {
        TaskTargets::Masks(masks.iter().flat_map(|m| m.data().iter().copied()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_augm: Option<f64>,
    pub l_task: f64,
    pub l_total: f64,
}

impl ModelHandle {
    /// Joint loss for `batch` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &JointBatch) -> Result<(LossBreakdown, Vec<f64>)> {
        let n = batch.images.n;
        let aug_targets = batch.aug_labels.as_ref().map(|t| t.expand(n)).transpose()?;
        let classes = self.classes;
        let task_kind = self.task();
        self.forward_backward(&batch.images, |out| {
            let (l_augm, d_aug) = match &aug_targets {
                Some(t) => {
                    let (l, g) = augmentation_loss_with_grad(&out.aug, t)?;
                    (Some(l), g)
                }
                None => (None, vec![0.0; n * NUM_TRANSFORMS]),
            };
            let (l_task, d_task) = match (&batch.task, &out.task, task_kind) {
                (TaskTargets::Classes(labels), TaskLogits::Classes(logits), TaskKind::Classification) => {
                    if labels.len() != n {
                        return Err(Error::ShapeMismatch(format!("{} labels for {n} images", labels.len())));
                    }
                    classification_loss_with_grad(logits, classes, labels)?
                }
                (TaskTargets::Masks(masks), TaskLogits::Map(logits), TaskKind::Segmentation) => {
                    segmentation_loss_with_grad(&logits.data, classes, masks, n, Mask::IGNORE)?
                }
                _ => return Err(Error::TaskMismatch("batch targets do not match the model's task head".into())),
            };
            let total = total_loss(l_augm.unwrap_or(LossValue::ZERO), l_task);
            let breakdown = LossBreakdown {
                l_augm: l_augm.map(LossValue::value),
                l_task: l_task.value(),
                l_total: total.value(),
            };
            Ok((breakdown, d_aug, d_task))
        })
    }
}

/// One optimizer update on the joint loss. A non-finite loss leaves the
/// model untouched and is reported as an error.
pub fn train_step(model: &mut ModelHandle, batch: &JointBatch, optimizer: &mut OptimizerState) -> Result<LossBreakdown> {
    let (losses, grads) = match model.loss_and_grad(batch) {
        Ok(v) => v,
        Err(Error::NonFiniteLoss { .. }) => {
            return Err(Error::NonFiniteLoss {
                l_augm: f64::NAN,
                l_task: f64::NAN,
            })
        }
        Err(e) => return Err(e),
    };
    if !losses.l_total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            l_augm: losses.l_augm.unwrap_or(0.0),
            l_task: losses.l_task,
        });
    }
    optimizer.step(&mut model.params, &grads);
    Ok(losses)
}

/// Argmax class per sample, or per pixel for segmentation maps.
pub fn argmax_predictions(task: &TaskLogits, classes: usize) -> Vec<usize> {
    match task {
        TaskLogits::Classes(v) => v.chunks(classes).map(argmax).collect(),
        TaskLogits::Map(t) => {
            let hw = t.h * t.w;
            let mut out = Vec::with_capacity(t.n * hw);
            for i in 0..t.n {
                let s = t.sample(i);
                for px in 0..hw {
                    let mut best = 0;
                    for k in 1..classes {
                        if s[k * hw + px] > s[best * hw + px] {
                            best = k;
                        }
                    }
                    out.push(best);
                }
            }
            out
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
