//! Losses for the joint objective. All reductions are means.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A finite, non-negative loss.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LossValue(f64);

impl LossValue {
    pub fn new(v: f64) -> Result<Self> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NonFiniteLoss { l_augm: v, l_task: 0.0 });
        }
        Ok(Self(v))
    }

    pub const ZERO: LossValue = LossValue(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Multi-label sigmoid + binary cross-entropy, averaged over batch and labels.
pub fn augmentation_loss(logits: &[f64], targets: &[f64]) -> Result<LossValue> {
    augmentation_loss_with_grad(logits, targets).map(|(l, _)| l)
}

pub fn augmentation_loss_with_grad(logits: &[f64], targets: &[f64]) -> Result<(LossValue, Vec<f64>)> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} augmentation logits vs {} targets",
            logits.len(),
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::NonBinaryTarget { value: t });
    }
    let n = logits.len() as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&x, &y) in logits.iter().zip(targets) {
        // -[y log σ(x) + (1-y) log(1-σ(x))] = softplus(x) - x·y
        sum += softplus(x) - x * y;
        grad.push((sigmoid(x) - y) / n);
    }
    Ok((LossValue::new(sum / n)?, grad))
}

fn log_softmax_row(row: &[f64]) -> (f64, f64) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
    (max, sum.ln())
}

/// Softmax cross-entropy over `classes` logits per sample, averaged over the batch.
pub fn classification_loss(logits: &[f64], classes: usize, labels: &[usize]) -> Result<LossValue> {
    classification_loss_with_grad(logits, classes, labels).map(|(l, _)| l)
}

pub fn classification_loss_with_grad(logits: &[f64], classes: usize, labels: &[usize]) -> Result<(LossValue, Vec<f64>)> {
    if classes == 0 || labels.is_empty() || logits.len() != labels.len() * classes {
        return Err(Error::ShapeMismatch(format!(
            "{} logits for {} labels x {classes} classes",
            logits.len(),
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: l, classes });
    }
    let n = labels.len() as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, (row, &label)) in logits.chunks(classes).zip(labels).enumerate() {
        let (max, lse) = log_softmax_row(row);
        sum += max + lse - row[label];
        let g = &mut grad[i * classes..(i + 1) * classes];
        for (gj, &v) in g.iter_mut().zip(row) {
            *gj = (v - max - lse).exp() / n;
        }
        g[label] -= 1.0 / n;
    }
    Ok((LossValue::new(sum / n)?, grad))
}

/// Per-pixel softmax cross-entropy for `n×classes×h×w` logits against
/// `n×h×w` masks, averaged over pixels whose label is not `ignore`.
///
/// A batch with no labelled pixels has zero loss and zero gradient.
pub fn segmentation_loss(logits: &[f64], classes: usize, masks: &[u8], batch: usize, ignore: u8) -> Result<LossValue> {
    segmentation_loss_with_grad(logits, classes, masks, batch, ignore).map(|(l, _)| l)
}

pub fn segmentation_loss_with_grad(
    logits: &[f64],
    classes: usize,
    masks: &[u8],
    batch: usize,
    ignore: u8,
) -> Result<(LossValue, Vec<f64>)> {
    if classes == 0 || batch == 0 || masks.is_empty() || !masks.len().is_multiple_of(batch) || logits.len() != masks.len() * classes {
        return Err(Error::ShapeMismatch(format!(
            "{} logits for {} mask pixels in {batch} samples x {classes} classes",
            logits.len(),
            masks.len()
        )));
    }
    if let Some(&bad) = masks.iter().find(|&&m| m != ignore && usize::from(m) >= classes) {
        return Err(Error::LabelOutOfRange {
            label: usize::from(bad),
            classes,
        });
    }
    let hw = masks.len() / batch;
    let mut grad = vec![0.0; logits.len()];
    let valid = masks.iter().filter(|&&m| m != ignore).count();
    if valid == 0 {
        return Ok((LossValue::ZERO, grad));
    }
    let denom = valid as f64;
    let mut sum = 0.0;
    let mut row = vec![0.0; classes];
    for i in 0..batch {
        let base = i * classes * hw;
        for px in 0..hw {
            let label = masks[i * hw + px];
            if label == ignore {
                continue;
            }
            for (k, r) in row.iter_mut().enumerate() {
                *r = logits[base + k * hw + px];
            }
            let (max, lse) = log_softmax_row(&row);
            let label = usize::from(label);
            sum += max + lse - row[label];
            for (k, &v) in row.iter().enumerate() {
                grad[base + k * hw + px] = (v - max - lse).exp() / denom;
            }
            grad[base + label * hw + px] -= 1.0 / denom;
        }
    }
    Ok((LossValue::new(sum / denom)?, grad))
}

/// The joint objective: an unweighted sum.
pub fn total_loss(l_augm: LossValue, l_task: LossValue) -> LossValue {
    LossValue(l_augm.0 + l_task.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logits_give_ln2() {
        let l = augmentation_loss(&[0.0; 30], &[1.0, 0.0].repeat(15)).unwrap();
        assert!((l.value() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_bce_is_tiny() {
        let targets: Vec<f64> = (0..15).map(|i| (i % 2) as f64).collect();
        let logits: Vec<f64> = targets.iter().map(|&t| if t == 1.0 { 40.0 } else { -40.0 }).collect();
        assert!(augmentation_loss(&logits, &targets).unwrap().value() < 1e-15);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let l = augmentation_loss(&[1e3, -1e3], &[0.0, 1.0]).unwrap();
        assert!((l.value() - 1e3).abs() < 1e-9);
    }

    #[test]
    fn bad_targets_and_shapes_are_rejected() {
        assert!(matches!(augmentation_loss(&[0.0], &[0.5]), Err(Error::NonBinaryTarget { .. })));
        assert!(augmentation_loss(&[0.0, 1.0], &[0.0]).is_err());
        assert!(matches!(
            classification_loss(&[0.0; 3], 3, &[3]),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(segmentation_loss(&[0.0; 5], 2, &[0, 1], 1, 255).is_err());
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let l = classification_loss(&[0.3; 20], 10, &[4, 7]).unwrap();
        assert!((l.value() - 10f64.ln()).abs() < 1e-12);
        let l = segmentation_loss(&[1.5; 3 * 4], 3, &[0, 1, 2, 1], 1, 255).unwrap();
        assert!((l.value() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ignored_pixels_do_not_count() {
        // second pixel is ignored; the first is predicted perfectly
        let logits = [50.0, 0.0, -50.0, 0.0];
        let l = segmentation_loss(&logits, 2, &[0, 255], 1, 255).unwrap();
        assert!(l.value() < 1e-20);
        let all_ignored = segmentation_loss(&logits, 2, &[255, 255], 1, 255).unwrap();
        assert_eq!(all_ignored.value(), 0.0);
    }

    #[test]
    fn total_is_exact_sum() {
        let t = total_loss(LossValue::new(0.693).unwrap(), LossValue::new(2.303).unwrap());
        assert!((t.value() - 2.996).abs() < 1e-12);
        assert_eq!(total_loss(LossValue::ZERO, LossValue::ZERO).value(), 0.0);
    }
}
