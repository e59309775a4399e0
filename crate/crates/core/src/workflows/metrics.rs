use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A test metric in percent. `numer/denom` is the exact fraction when it
/// fits in 64 bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetric {
    /// `top1` or `miou`.
    pub name: String,
    pub percent: f64,
    pub exact: Option<(u64, u64)>,
}

impl TaskMetric {
    fn from_ratio(name: &str, r: Option<Ratio<u64>>, fallback: f64) -> Self {
        let percent = r.map_or(fallback, |r| *r.numer() as f64 / *r.denom() as f64) * 100.0;
        Self {
            name: name.to_string(),
            percent,
            exact: r.map(|r| (*r.numer(), *r.denom())),
        }
    }

    pub fn ratio(&self) -> Option<Ratio<u64>> {
        self.exact.map(|(n, d)| Ratio::new(n, d))
    }
}

pub fn top1_accuracy(predictions: &[usize], labels: &[usize]) -> Result<TaskMetric> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset("no labels to score".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count() as u64;
    Ok(TaskMetric::from_ratio(
        "top1",
        Some(Ratio::new(correct, labels.len() as u64)),
        0.0,
    ))
}

/// Intersection and union counts per class, accumulated over a whole split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IouCounts {
    pub intersection: Vec<u64>,
    pub union: Vec<u64>,
}

impl IouCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            intersection: vec![0; classes],
            union: vec![0; classes],
        }
    }

    /// Adds one prediction/truth pair; pixels labelled `ignore` are skipped.
    pub fn add(&mut self, predictions: &[usize], truth: &[u8], ignore: u8) -> Result<()> {
        if predictions.len() != truth.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} predicted pixels for {} labelled pixels",
                predictions.len(),
                truth.len()
            )));
        }
        let k = self.intersection.len();
        for (&p, &t) in predictions.iter().zip(truth) {
            if t == ignore {
                continue;
            }
            let t = usize::from(t);
            if t >= k || p >= k {
                return Err(Error::LabelOutOfRange {
                    label: t.max(p),
                    classes: k,
                });
            }
            if p == t {
                self.intersection[t] += 1;
                self.union[t] += 1;
            } else {
                self.union[t] += 1;
                self.union[p] += 1;
            }
        }
        Ok(())
    }

    /// IoU per class; `None` for classes absent from both prediction and truth.
    pub fn per_class(&self) -> Vec<Option<Ratio<u64>>> {
        self.intersection
            .iter()
            .zip(&self.union)
            .map(|(&i, &u)| (u > 0).then(|| Ratio::new(i, u)))
            .collect()
    }

    /// Mean IoU over the classes that occur.
    pub fn mean(&self) -> Result<TaskMetric> {
        let present: Vec<Ratio<u64>> = self.per_class().into_iter().flatten().collect();
        if present.is_empty() {
            return Err(Error::EmptyDataset("no labelled pixels to score".into()));
        }
        let n = present.len() as u64;
        let exact = present
            .iter()
            .try_fold(Ratio::new(0u64, 1), |acc, r| acc.checked_add(r))
            .and_then(|s| s.checked_div(&Ratio::from_integer(n)));
        let approx = present.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).sum::<f64>() / n as f64;
        Ok(TaskMetric::from_ratio("miou", exact, approx))
    }
}

pub fn mean_iou(predictions: &[usize], truth: &[u8], classes: usize, ignore: u8) -> Result<TaskMetric> {
    let mut c = IouCounts::new(classes);
    c.add(predictions, truth, ignore)?;
    c.mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_miou_is_seven_twelfths() {
        let m = mean_iou(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, 255).unwrap();
        assert_eq!(m.ratio(), Some(Ratio::new(7, 12)));
    }

    #[test]
    fn perfect_scores() {
        assert_eq!(top1_accuracy(&[1, 2, 0], &[1, 2, 0]).unwrap().percent, 100.0);
        assert_eq!(mean_iou(&[0, 2, 1], &[0, 2, 1], 3, 255).unwrap().percent, 100.0);
    }

    #[test]
    fn ignored_pixels_do_not_count() {
        let m = mean_iou(&[0, 1, 1], &[0, 255, 255], 2, 255).unwrap();
        assert_eq!(m.percent, 100.0);
    }
}
