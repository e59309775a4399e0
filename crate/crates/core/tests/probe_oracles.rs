//! The probe's planted signals measured directly on pixels, plus checkpoint
//! round trips.

mod common;

use common::best_threshold_accuracy;
use safeaug::data::{load_checkpoint, make_synthetic_probe, save_checkpoint, Checkpoint, SyntheticProbeSpec};
use safeaug::model::{Backbone, ModelHandle, OptimizerSpec, OptimizerState};
use safeaug::rng;
use safeaug::transform::{apply_transform, AugmentationSpec, Image, Shape, Transform};

fn probe_images(samples: usize, seed: u64) -> Vec<Image> {
    let h = make_synthetic_probe(&SyntheticProbeSpec {
        samples,
        seed,
        ..SyntheticProbeSpec::default()
    })
    .unwrap();
    h.train.images.into_iter().chain(h.test.images).chain(h.val.images).collect()
}

fn top_minus_bottom(img: &Image) -> f64 {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let half = |rows: std::ops::Range<usize>| {
        let n = rows.len() * w * c;
        rows.flat_map(|y| (0..w).flat_map(move |x| (0..c).map(move |ch| (y, x, ch))))
            .map(|(y, x, ch)| img.get(y, x, ch) as f64)
            .sum::<f64>()
            / n as f64
    };
    half(0..h / 2) - half(h / 2..h)
}

#[test]
fn vertical_flip_is_detectable_from_half_means() {
    let images = probe_images(2000, 1);
    let s = images[0].height();
    let flip = AugmentationSpec::new(Transform::default_for("VerticalFlip", s, s).unwrap(), 1.0);
    let mut r = rng::seeded(0);
    let mut correct = 0usize;
    for img in &images {
        correct += usize::from(top_minus_bottom(img) > 0.0);
        correct += usize::from(top_minus_bottom(&apply_transform(img, &flip, &mut r).unwrap()) < 0.0);
    }
    let acc = correct as f64 / (2 * images.len()) as f64;
    assert!(acc >= 0.99, "sign-rule accuracy {acc}");
}

#[test]
fn random_brightness_is_hidden_by_the_nuisance() {
    let images = probe_images(4000, 2);
    let s = images[0].height();
    let bright = AugmentationSpec::new(Transform::default_for("RandomBrightness", s, s).unwrap(), 1.0);
    let mut r = rng::seeded(1);
    let (mut neg, mut pos) = (Vec::new(), Vec::new());
    for (i, img) in images.iter().enumerate() {
        if i % 2 == 0 {
            neg.push(img.mean());
        } else {
            pos.push(apply_transform(img, &bright, &mut r).unwrap().mean());
        }
    }
    let acc = best_threshold_accuracy(&neg, &pos);
    assert!(acc <= 0.55, "best threshold separates at {acc}");
}

#[test]
fn probe_generation_is_deterministic() {
    let a = make_synthetic_probe(&SyntheticProbeSpec { samples: 200, ..SyntheticProbeSpec::default() }).unwrap();
    let b = make_synthetic_probe(&SyntheticProbeSpec { samples: 200, ..SyntheticProbeSpec::default() }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let model = ModelHandle::new(Backbone::Tiny, Shape::new(8, 8, 3), 4, 3).unwrap();
    let mut opt = OptimizerState::new(OptimizerSpec::sgd_default(), model.params.len());
    opt.lr = 0.0123;
    opt.steps = 17;
    opt.first.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
    let ckpt = Checkpoint::new(model, Some(opt), "abc123", 4);
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &ckpt).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, ckpt);
    for (a, b) in back.model.params.iter().zip(&ckpt.model.params) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    save_checkpoint(&dir.path().join("again.ckpt"), &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("again.ckpt")).unwrap());
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = ModelHandle::new(Backbone::Tiny, Shape::new(8, 8, 3), 2, 0).unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &Checkpoint::new(model, None, "h", 0)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(safeaug::Error::Integrity(_))));
}
