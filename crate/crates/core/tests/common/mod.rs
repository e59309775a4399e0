//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner. Nothing here calls the code it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeaug::analyzer::{AugmentationPredictor, UnitRecord, UnitView};
use safeaug::model::{AugTargets, Backbone, JointBatch, ModelHandle, TaskTargets, Tensor};
use safeaug::transform::{AugmentationLabelVector, Image, Shape, NUM_TRANSFORMS};

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Textbook sigmoid cross-entropy, one term at a time.
pub fn bce_oracle(logits: &[f64], targets: &[f64]) -> f64 {
    let terms = logits.iter().zip(targets).map(|(&x, &y)| {
        let s = 1.0 / (1.0 + (-x).exp());
        -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
    });
    compensated_sum(terms) / logits.len() as f64
}

/// `-log softmax(z)[y]` for one row, as `log Σ_j exp(z_j - z_y)`.
pub fn ce_row_oracle(row: &[f64], label: usize) -> f64 {
    compensated_sum(row.iter().map(|&z| (z - row[label]).exp())).ln()
}

pub fn ce_oracle(logits: &[f64], classes: usize, labels: &[usize]) -> f64 {
    let terms = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| ce_row_oracle(&logits[i * classes..(i + 1) * classes], l));
    compensated_sum(terms) / labels.len() as f64
}

/// `logits` are `n×K×h×w`, `masks` are `n×h×w`.
pub fn seg_oracle(logits: &[f64], classes: usize, masks: &[u8], batch: usize, ignore: u8) -> f64 {
    let hw = masks.len() / batch;
    let mut terms = Vec::new();
    for i in 0..batch {
        for px in 0..hw {
            let m = masks[i * hw + px];
            if m == ignore {
                continue;
            }
            let row: Vec<f64> = (0..classes).map(|k| logits[(i * classes + k) * hw + px]).collect();
            terms.push(ce_row_oracle(&row, usize::from(m)));
        }
    }
    if terms.is_empty() {
        return 0.0;
    }
    let n = terms.len() as f64;
    compensated_sum(terms) / n
}

/// Per-class IoU counted by hand from flat label arrays.
pub fn miou_oracle(pred: &[u8], truth: &[u8], classes: usize, ignore: u8) -> f64 {
    let mut total = 0.0;
    let mut present = 0;
    for k in 0..classes as u8 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&p, &t) in pred.iter().zip(truth) {
            if t == ignore {
                continue;
            }
            inter += usize::from(p == k && t == k);
            union += usize::from(p == k || t == k);
        }
        if union > 0 {
            total += inter as f64 / union as f64;
            present += 1;
        }
    }
    100.0 * total / present as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// A random joint batch for `model` with per-batch augmentation labels.
pub fn random_batch(model: &ModelHandle, r: &mut ChaCha8Rng, n: usize) -> JointBatch {
    let s = model.input;
    let data = (0..n * s.channels * s.height * s.width).map(|_| r.random_range(-1.0..1.0)).collect();
    let images = Tensor::from_vec(n, s.channels, s.height, s.width, data).unwrap();
    let mut labels = AugmentationLabelVector::zeros();
    for i in 0..NUM_TRANSFORMS {
        if r.random::<bool>() {
            labels.set(i);
        }
    }
    let task = match model.backbone {
        Backbone::TinySeg => TaskTargets::Masks(
            (0..n * s.height * s.width)
                .map(|i| if i % 11 == 0 { 255 } else { r.random_range(0..model.classes) as u8 })
                .collect(),
        ),
        _ => TaskTargets::Classes((0..n).map(|_| r.random_range(0..model.classes)).collect()),
    };
    JointBatch {
        images,
        aug_labels: Some(AugTargets::PerBatch(labels)),
        task,
    }
}

/// Worst relative error between the analytic gradient and central
/// differences over `count` random parameters.
pub fn gradient_check(backbone: Backbone, input: Shape, classes: usize, seed: u64, count: usize) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let model = ModelHandle::new(backbone, input, classes, seed).unwrap();
    let batch = random_batch(&model, &mut r, 3);
    let (_, grad) = model.loss_and_grad(&batch).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let i = r.random_range(0..model.params.len());
        let mut plus = model.clone();
        plus.params[i] += h;
        let mut minus = model.clone();
        minus.params[i] -= h;
        let lp = plus.loss_and_grad(&batch).unwrap().0.l_total;
        let lm = minus.loss_and_grad(&batch).unwrap().0.l_total;
        worst = worst.max(rel_err(grad[i], (lp - lm) / (2.0 * h)));
    }
    worst
}

/// Fixed-logit predictors for checking the analyzer's counting.
pub enum Stub {
    AlwaysPositive,
    AlwaysNegative,
    /// Reads the ground truth of the unit.
    Oracle,
    /// Independent fair coin per unit and label, keyed by the unit index.
    CoinFlip(u64),
}

impl AugmentationPredictor for Stub {
    fn predict_augmentations(&self, view: &UnitView<'_>) -> safeaug::Result<Vec<f64>> {
        let n = view.images.n;
        let row: Vec<f64> = match self {
            Stub::AlwaysPositive => vec![8.0; NUM_TRANSFORMS],
            Stub::AlwaysNegative => vec![-8.0; NUM_TRANSFORMS],
            Stub::Oracle => (0..NUM_TRANSFORMS)
                .map(|i| if view.truth.get(i) { 8.0 } else { -8.0 })
                .collect(),
            Stub::CoinFlip(seed) => {
                let mut r = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(view.index as u64));
                (0..NUM_TRANSFORMS)
                    .map(|_| if r.random::<bool>() { 8.0 } else { -8.0 })
                    .collect()
            }
        };
        Ok(row.repeat(n))
    }
}

/// Per-label counts recomputed from stored unit predictions.
pub struct Recount {
    pub positives: Vec<usize>,
    pub correct: Vec<usize>,
    pub fired: Vec<usize>,
}

pub fn recount(units: &[UnitRecord], threshold: f64) -> Recount {
    let mut out = Recount {
        positives: vec![0; NUM_TRANSFORMS],
        correct: vec![0; NUM_TRANSFORMS],
        fired: vec![0; NUM_TRANSFORMS],
    };
    for u in units {
        for i in 0..NUM_TRANSFORMS {
            let p = 1.0 / (1.0 + (-u.mean_logits[i]).exp()) > threshold;
            let t = u.truth.get(i);
            out.positives[i] += usize::from(p);
            out.correct[i] += usize::from(p == t);
            out.fired[i] += usize::from(t);
        }
    }
    out
}

/// Smooth random RGB images.
pub fn random_images(n: usize, size: usize, seed: u64) -> Vec<Image> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (a, b, c): (f32, f32, f32) = (r.random(), r.random(), r.random());
            Image::from_fn(size, size, 3, |y, x, ch| {
                let v = 0.2 + 0.3 * a + 0.2 * b * (y as f32 / size as f32) + 0.2 * c * (x as f32 / size as f32);
                (v + 0.05 * ch as f32 + 0.02 * r_noise(y, x, ch)).clamp(0.0, 1.0)
            })
            .unwrap()
        })
        .collect()
}

fn r_noise(y: usize, x: usize, c: usize) -> f32 {
    (((y * 31 + x * 17 + c * 7) % 13) as f32 / 13.0) - 0.5
}

/// Fraction correct of the best single threshold on `score` for telling
/// `neg` from `pos`, in either direction.
pub fn best_threshold_accuracy(neg: &[f64], pos: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = neg.iter().map(|&v| (v, false)).chain(pos.iter().map(|&v| (v, true))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (n_neg, n_pos) = (neg.len() as f64, pos.len() as f64);
    let (mut below_neg, mut below_pos) = (0.0, 0.0);
    let mut best = 0.5f64;
    for (_, is_pos) in &all {
        if *is_pos {
            below_pos += 1.0;
        } else {
            below_neg += 1.0;
        }
        // balanced accuracy of "below threshold ⇒ negative" and its mirror
        let acc = 0.5 * (below_neg / n_neg + (n_pos - below_pos) / n_pos);
        best = best.max(acc).max(1.0 - acc);
    }
    best
}

/// CIFAR-10 root from the environment, if it holds the binary batches.
pub fn real_cifar_root() -> Option<std::path::PathBuf> {
    let root = std::path::PathBuf::from(std::env::var_os("SAFEAUG_DATA_ROOT")?);
    ["cifar-10-batches-bin", "cifar10", "."]
        .iter()
        .map(|d| root.join(d))
        .find(|d| d.join("data_batch_1.bin").is_file())
        .map(|_| root)
}

/// Writes a ten-class 32×32 stand-in in CIFAR-10 binary layout under
/// `root/cifar-10-batches-bin`: colour ring patterns with random centre,
/// phase, contrast and brightness, `per_batch` images in each of the five train
/// batches and `test` images in the test batch.
pub fn write_cifar_standin(root: &std::path::Path, per_batch: usize, test: usize, seed: u64) {
    let dir = root.join("cifar-10-batches-bin");
    std::fs::create_dir_all(&dir).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let batch = |n: usize, r: &mut ChaCha8Rng| -> (Vec<Image>, Vec<usize>) {
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let images = labels.iter().map(|&l| standin_image(l, r)).collect();
        (images, labels)
    };
    for b in 1..=5 {
        let (images, labels) = batch(per_batch, &mut r);
        safeaug::data::write_cifar10_batch(&dir.join(format!("data_batch_{b}.bin")), &images, &labels).unwrap();
    }
    let (images, labels) = batch(test, &mut r);
    safeaug::data::write_cifar10_batch(&dir.join("test_batch.bin"), &images, &labels).unwrap();
}

fn standin_image(label: usize, r: &mut ChaCha8Rng) -> Image {
    use std::f64::consts::PI;
    // rotation-free classes (ring frequency x colour scheme) lit from the
    // top, so geometric transforms keep the label but flips show
    let freq = 1.5 + 0.5 * (label % 5) as f64;
    let hue = if label < 5 { [0.9, 0.6, 0.3] } else { [0.3, 0.6, 0.9] };
    let phase: f64 = r.random::<f64>() * 2.0 * PI;
    let contrast = r.random_range(0.1..0.3);
    let gain = r.random_range(0.7..1.2);
    let (cx, cy) = (r.random_range(10.0..22.0), r.random_range(10.0..22.0));
    let data: Vec<f32> = (0..32 * 32 * 3)
        .map(|i| {
            let (y, x, c) = (i / 96, (i / 3) % 32, i % 3);
            let radius = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let rings = (2.0 * PI * freq * radius / 16.0 + phase).cos();
            let light = 0.15 * (0.5 - y as f64 / 31.0);
            let v = gain * (0.4 + contrast * rings * hue[c] + light);
            (v + r.random_range(-0.1..0.1)).clamp(0.0, 1.0) as f32
        })
        .collect();
    Image::new(32, 32, 3, data).unwrap()
}
