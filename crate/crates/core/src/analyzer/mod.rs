//! Clean-set false positives, augmented-set accuracy and safe-set selection.
//!
//! Evaluation works on units: a batch of test images that shares one
//! augmentation label vector. Per-item augmentation logits are averaged over
//! the unit before thresholding.

mod report;

use serde::{Deserialize, Serialize};

use crate::data::{to_tensor, NormStats};
use crate::model::{ModelHandle, Tensor};
use crate::rng;
use crate::transform::{
    apply_pipeline_batch, label_mapping, sample_subset, AugmentationLabelVector, AugmentationSet, Image, Shape,
    SubsetMode, CATALOG_NAMES, NUM_TRANSFORMS,
};
use crate::{Error, Result};

pub use report::{emit_report, load_report, parse_report, render_figure, render_table, SafetyReport, TaskAccuracies, REPORT_SCHEMA_VERSION};

/// What a predictor sees for one evaluation unit.
#[derive(Debug, Clone, Copy)]
pub struct UnitView<'a> {
    /// Normalized batch at model resolution.
    pub images: &'a Tensor,
    /// Transforms actually applied to the batch. Real models must ignore it;
    /// it exists so oracle stubs can be expressed.
    pub truth: &'a AugmentationLabelVector,
    /// Position of the unit in evaluation order.
    pub index: usize,
}

/// Anything that produces `n×15` augmentation logits for a batch.
pub trait AugmentationPredictor {
    fn predict_augmentations(&self, unit: &UnitView<'_>) -> Result<Vec<f64>>;
}

impl AugmentationPredictor for ModelHandle {
    fn predict_augmentations(&self, unit: &UnitView<'_>) -> Result<Vec<f64>> {
        Ok(self.forward(unit.images)?.aug)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub batch_size: usize,
    /// Passes over the test set when evaluating augmented accuracy.
    pub rounds: usize,
    pub decision_threshold: f64,
    /// Subset sizes are drawn uniformly from `0..=max_subset_size`.
    pub max_subset_size: usize,
    pub seed: u64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            rounds: 1,
            decision_threshold: 0.5,
            max_subset_size: 5,
            seed: 0,
        }
    }
}

/// Mean logits and ground truth of one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub truth: AugmentationLabelVector,
    pub mean_logits: Vec<f64>,
}

impl UnitRecord {
    /// `σ(logit) > θ`, evaluated as `logit > logit(θ)`.
    pub fn predicted(&self, label: usize, threshold: f64) -> bool {
        sigmoid(self.mean_logits[label]) > threshold
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanEvaluation {
    pub units: Vec<UnitRecord>,
    pub positives: Vec<usize>,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugEvaluation {
    pub units: Vec<UnitRecord>,
    pub correct: Vec<usize>,
    pub fired: Vec<usize>,
    pub true_positives: Vec<usize>,
    pub accuracy: Vec<f64>,
    /// `None` for labels that never fired.
    pub recall: Vec<Option<f64>>,
    /// Mean of recall and specificity, or whichever of the two is defined.
    pub balanced_accuracy: Vec<f64>,
}

fn check(images: &[Image], config: &AnalyzerConfig) -> Result<()> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("evaluation set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.decision_threshold) {
        return Err(Error::InvalidArgument(format!(
            "decision threshold {} outside [0, 1]",
            config.decision_threshold
        )));
    }
    Ok(())
}

fn mean_logits(logits: &[f64], n: usize) -> Result<Vec<f64>> {
    if logits.len() != n * NUM_TRANSFORMS {
        return Err(Error::ShapeMismatch(format!(
            "predictor returned {} logits for {n} images",
            logits.len()
        )));
    }
    let mut m = vec![0.0; NUM_TRANSFORMS];
    for row in logits.chunks_exact(NUM_TRANSFORMS) {
        for (a, b) in m.iter_mut().zip(row) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= n as f64);
    Ok(m)
}

/// Step 2: untouched test batches; the rate for label `i` is the fraction of
/// units where the mean prediction for `i` is positive.
pub fn evaluate_clean_false_positives<P: AugmentationPredictor + ?Sized>(
    predictor: &P,
    images: &[Image],
    stats: &NormStats,
    input: Shape,
    config: &AnalyzerConfig,
) -> Result<CleanEvaluation> {
    check(images, config)?;
    let truth = AugmentationLabelVector::zeros();
    let mut units = Vec::new();
    for (index, chunk) in images.chunks(config.batch_size).enumerate() {
        let x = to_tensor(chunk, stats, input)?;
        let logits = predictor.predict_augmentations(&UnitView {
            images: &x,
            truth: &truth,
            index,
        })?;
        units.push(UnitRecord {
            truth,
            mean_logits: mean_logits(&logits, chunk.len())?,
        });
    }
    Ok(count_clean(units, config.decision_threshold))
}

pub fn count_clean(units: Vec<UnitRecord>, threshold: f64) -> CleanEvaluation {
    let mut positives = vec![0usize; NUM_TRANSFORMS];
    for u in &units {
        for (i, p) in positives.iter_mut().enumerate() {
            *p += usize::from(u.predicted(i, threshold));
        }
    }
    let rates = positives.iter().map(|&p| p as f64 / units.len() as f64).collect();
    CleanEvaluation { units, positives, rates }
}

/// Step 3: each unit gets a random subset (size uniform in
/// `0..=max_subset_size`) applied with probability 1, exactly as in training.
pub fn evaluate_augmentation_accuracy<P: AugmentationPredictor + ?Sized>(
    predictor: &P,
    images: &[Image],
    stats: &NormStats,
    input: Shape,
    set: &AugmentationSet,
    config: &AnalyzerConfig,
) -> Result<AugEvaluation> {
    check(images, config)?;
    let mode = SubsetMode::RandomSize {
        max: config.max_subset_size.min(set.len()),
    };
    let mut r = rng::derive(config.seed, &[rng::tag("analyzer-step3")]);
    let mut units = Vec::new();
    let mut index = 0;
    for _ in 0..config.rounds.max(1) {
        for chunk in images.chunks(config.batch_size) {
            let subset = sample_subset(set, mode, &mut r)?;
            let out = apply_pipeline_batch(chunk, None, set, &subset, 1.0, &mut r)?;
            let x = to_tensor(&out.images, stats, input)?;
            let logits = predictor.predict_augmentations(&UnitView {
                images: &x,
                truth: &out.labels,
                index,
            })?;
            units.push(UnitRecord {
                truth: out.labels,
                mean_logits: mean_logits(&logits, chunk.len())?,
            });
            index += 1;
        }
    }
    Ok(count_augmented(units, config.decision_threshold))
}

pub fn count_augmented(units: Vec<UnitRecord>, threshold: f64) -> AugEvaluation {
    let mut correct = vec![0usize; NUM_TRANSFORMS];
    let mut fired = vec![0usize; NUM_TRANSFORMS];
    let mut true_positives = vec![0usize; NUM_TRANSFORMS];
    for u in &units {
        for i in 0..NUM_TRANSFORMS {
            let (pred, truth) = (u.predicted(i, threshold), u.truth.get(i));
            correct[i] += usize::from(pred == truth);
            fired[i] += usize::from(truth);
            true_positives[i] += usize::from(pred && truth);
        }
    }
    let n = units.len() as f64;
    let accuracy = correct.iter().map(|&c| c as f64 / n).collect();
    let recall: Vec<Option<f64>> = fired
        .iter()
        .zip(&true_positives)
        .map(|(&f, &tp)| (f > 0).then(|| tp as f64 / f as f64))
        .collect();
    let balanced_accuracy = (0..NUM_TRANSFORMS)
        .map(|i| {
            let negatives = units.len() - fired[i];
            let true_negatives = correct[i] - true_positives[i];
            let specificity = (negatives > 0).then(|| true_negatives as f64 / negatives as f64);
            match (recall[i], specificity) {
                (Some(r), Some(s)) => (r + s) / 2.0,
                (Some(x), None) | (None, Some(x)) => x,
                (None, None) => 0.0,
            }
        })
        .collect();
    AugEvaluation {
        units,
        correct,
        fired,
        true_positives,
        accuracy,
        recall,
        balanced_accuracy,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub name: String,
    pub clean_fp_rate: f64,
    pub aug_accuracy: f64,
    pub aug_recall: Option<f64>,
    pub aug_balanced_accuracy: f64,
    /// Clean units evaluated.
    pub clean_support: usize,
    /// Augmented units evaluated.
    pub aug_support: usize,
    /// Augmented units in which the label fired.
    pub fired_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyMetrics {
    pub labels: Vec<LabelMetrics>,
}

impl SafetyMetrics {
    pub fn from_evaluations(clean: &CleanEvaluation, aug: &AugEvaluation) -> Self {
        let labels = CATALOG_NAMES
            .iter()
            .enumerate()
            .map(|(i, name)| LabelMetrics {
                name: (*name).to_string(),
                clean_fp_rate: clean.rates[i],
                aug_accuracy: aug.accuracy[i],
                aug_recall: aug.recall[i],
                aug_balanced_accuracy: aug.balanced_accuracy[i],
                clean_support: clean.units.len(),
                aug_support: aug.units.len(),
                fired_support: aug.fired[i],
            })
            .collect();
        Self { labels }
    }

    pub fn get(&self, name: &str) -> Option<&LabelMetrics> {
        self.labels.iter().find(|l| l.name == name)
    }

    /// Every catalog label present exactly once, rates in `[0, 1]`, support > 0.
    pub fn validate(&self) -> Result<()> {
        for name in CATALOG_NAMES {
            let n = self.labels.iter().filter(|l| l.name == name).count();
            if n != 1 {
                return Err(Error::MissingLabel(name.to_string()));
            }
        }
        if let Some(extra) = self.labels.iter().find(|l| !CATALOG_NAMES.contains(&l.name.as_str())) {
            return Err(Error::UnknownTransform(extra.name.clone()));
        }
        for l in &self.labels {
            let rates = [
                Some(l.clean_fp_rate),
                Some(l.aug_accuracy),
                l.aug_recall,
                Some(l.aug_balanced_accuracy),
            ];
            if rates.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::InvalidArgument(format!("rate outside [0, 1] for {}", l.name)));
            }
            if l.clean_support == 0 || l.aug_support == 0 {
                return Err(Error::InvalidArgument(format!("zero support for {}", l.name)));
            }
        }
        Ok(())
    }
}

/// Which step-3 statistic is compared against `acc_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyKind {
    /// Chance level is 0.5 whatever the firing rate of the label.
    #[default]
    Balanced,
    /// Plain accuracy over all units. Chance level is `1 - firing rate`,
    /// about 5/6 under the default sampler.
    Binary,
}

impl AccuracyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(AccuracyKind::Balanced),
            "binary" => Ok(AccuracyKind::Binary),
            other => Err(Error::InvalidArgument(format!(
                "unknown accuracy kind `{other}` (expected balanced or binary)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AccuracyKind::Balanced => "balanced",
            AccuracyKind::Binary => "binary",
        }
    }

    pub fn of(&self, m: &LabelMetrics) -> f64 {
        match self {
            AccuracyKind::Balanced => m.aug_balanced_accuracy,
            AccuracyKind::Binary => m.aug_accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub fp_max: f64,
    pub acc_max: f64,
    pub decision_threshold: f64,
    #[serde(default)]
    pub accuracy: AccuracyKind,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            fp_max: 0.05,
            acc_max: 0.6,
            decision_threshold: 0.5,
            accuracy: AccuracyKind::Balanced,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let bad: Vec<String> = [
            ("fp_max", self.fp_max),
            ("acc_max", self.acc_max),
            ("decision_threshold", self.decision_threshold),
        ]
        .iter()
        .filter(|(_, v)| !(0.0..=1.0).contains(v))
        .map(|(k, v)| format!("{k} = {v} is outside [0, 1]"))
        .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub run_id: Option<String>,
    pub metrics: Option<SafetyMetrics>,
    /// Manual edits applied after selection, in order.
    pub refinements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeSet {
    /// Catalog names in label order.
    pub members: Vec<String>,
    pub thresholds: Thresholds,
    pub provenance: Provenance,
}

impl SafeSet {
    pub fn contains(&self, name: &str) -> bool {
        self.members.iter().any(|m| m == name)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The members with default magnitudes for `height×width` inputs.
    pub fn to_augmentation_set(&self, height: usize, width: usize, p: f64) -> Result<AugmentationSet> {
        AugmentationSet::catalog(height, width, p).restrict(&self.members)
    }
}

/// Step 4: label `i` is safe iff `fp(i) <= fp_max` and `acc(i) <= acc_max`,
/// with `acc` chosen by `thresholds.accuracy`.
pub fn select_safe_set(metrics: &SafetyMetrics, thresholds: Thresholds) -> Result<SafeSet> {
    thresholds.validate()?;
    metrics.validate()?;
    let members = CATALOG_NAMES
        .iter()
        .filter(|name| {
            let m = metrics.get(name).expect("validated");
            m.clean_fp_rate <= thresholds.fp_max && thresholds.accuracy.of(m) <= thresholds.acc_max
        })
        .map(|s| (*s).to_string())
        .collect();
    Ok(SafeSet {
        members,
        thresholds,
        provenance: Provenance {
            metrics: Some(metrics.clone()),
            ..Provenance::default()
        },
    })
}

/// Removes `exclusions` from the set. Names outside the catalog are skipped
/// and reported as warnings.
pub fn refine_safe_set<S: AsRef<str>>(safe: &SafeSet, exclusions: &[S]) -> (SafeSet, Vec<String>) {
    let mapping = label_mapping();
    let mut warnings = Vec::new();
    let mut removed = Vec::new();
    for e in exclusions {
        let e = e.as_ref();
        if mapping.iter().any(|m| m == e) {
            removed.push(e.to_string());
        } else {
            warnings.push(format!("`{e}` is not a catalog transform; ignored"));
        }
    }
    let mut out = safe.clone();
    out.members.retain(|m| !removed.contains(m));
    if !removed.is_empty() {
        out.provenance.refinements.push(format!("manually removed: {}", removed.join(", ")));
    }
    (out, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(fp: f64, acc: f64) -> SafetyMetrics {
        SafetyMetrics {
            labels: CATALOG_NAMES
                .iter()
                .map(|n| LabelMetrics {
                    name: (*n).into(),
                    clean_fp_rate: fp,
                    aug_accuracy: acc,
                    aug_recall: None,
                    aug_balanced_accuracy: acc,
                    clean_support: 1,
                    aug_support: 1,
                    fired_support: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn extreme_thresholds() {
        let m = metrics(0.1, 0.7);
        let none = Thresholds {
            fp_max: 0.0,
            acc_max: 0.0,
            ..Thresholds::default()
        };
        assert!(select_safe_set(&m, none).unwrap().is_empty());
        let all = Thresholds {
            fp_max: 1.0,
            acc_max: 1.0,
            ..Thresholds::default()
        };
        assert_eq!(select_safe_set(&m, all).unwrap().len(), NUM_TRANSFORMS);
    }

    #[test]
    fn missing_label_is_an_error() {
        let mut m = metrics(0.0, 0.0);
        m.labels.pop();
        assert!(matches!(select_safe_set(&m, Thresholds::default()), Err(Error::MissingLabel(_))));
    }

    #[test]
    fn refinement() {
        let all = Thresholds {
            fp_max: 1.0,
            acc_max: 1.0,
            ..Thresholds::default()
        };
        let s = select_safe_set(&metrics(0.0, 0.0), all).unwrap();
        let (same, w) = refine_safe_set::<&str>(&s, &[]);
        assert_eq!(same, s);
        assert!(w.is_empty());
        let (v2, w) = refine_safe_set(&s, &["RandomCrop", "CenterCrop", "Sharpen"]);
        assert_eq!(v2.len(), NUM_TRANSFORMS - 2);
        assert_eq!(w.len(), 1);
        assert_eq!(v2.provenance.refinements.len(), 1);
        let (empty, _) = refine_safe_set(&s, &CATALOG_NAMES);
        assert!(empty.is_empty());
    }

    #[test]
    fn saturated_biases() {
        let input = Shape::new(8, 8, 3);
        let mut model = ModelHandle::new(crate::model::Backbone::Tiny, input, 2, 0).unwrap();
        let images = vec![Image::filled(8, 8, 3, 0.5).unwrap(); 10];
        let stats = NormStats::identity(3);
        let cfg = AnalyzerConfig {
            batch_size: 4,
            ..AnalyzerConfig::default()
        };
        model.block_mut("aug_head.weight").unwrap().fill(0.0);
        for (bias, rate) in [(-40.0, 0.0), (40.0, 1.0)] {
            model.block_mut("aug_head.bias").unwrap().fill(bias);
            let e = evaluate_clean_false_positives(&model, &images, &stats, input, &cfg).unwrap();
            assert_eq!(e.units.len(), 3);
            assert!(e.rates.iter().all(|&r| r == rate));
        }
    }
}
