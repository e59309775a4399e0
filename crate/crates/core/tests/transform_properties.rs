//! Catalog-wide transform properties: involutions, shape contracts,
//! identity pipelines, determinism and the pixel-level examples.

use proptest::prelude::*;
use safeaug::rng;
use safeaug::transform::{
    apply_pipeline, apply_pipeline_batch, apply_transform, output_shape, rotate90, sample_subset, AugmentationSet,
    AugmentationSpec, Image, Shape, SubsetMode, SubsetSample, Transform, CATALOG_NAMES,
};

fn image(h: usize, w: usize, seed: u64) -> Image {
    Image::from_fn(h, w, 3, |y, x, c| {
        let v = (y as u64 * 131 + x as u64 * 71 + c as u64 * 17).wrapping_add(seed.wrapping_mul(7919)) % 251;
        v as f32 / 250.0
    })
    .unwrap()
}

fn spec(name: &str, h: usize, w: usize) -> AugmentationSpec {
    AugmentationSpec::new(Transform::default_for(name, h, w).unwrap(), 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flips_and_transpose_are_involutions(h in 1usize..24, w in 1usize..24, seed in any::<u64>()) {
        let img = image(h, w, seed);
        for name in ["HorizontalFlip", "VerticalFlip", "Transpose"] {
            let s = spec(name, h.max(2), w.max(2));
            let mut r = rng::seeded(seed);
            let twice = apply_transform(&apply_transform(&img, &s, &mut r).unwrap(), &s, &mut r).unwrap();
            prop_assert_eq!(&twice, &img, "{}", name);
        }
    }

    #[test]
    fn four_quarter_turns_are_identity(h in 1usize..24, w in 1usize..24, k in 0u8..4, seed in any::<u64>()) {
        let img = image(h, w, seed);
        let mut out = img.clone();
        for _ in 0..4 {
            out = rotate90(&out, k);
        }
        prop_assert_eq!(out, img);
    }

    #[test]
    fn output_shape_matches_every_transform(side in 8usize..40, c in prop::sample::select(vec![1usize, 3]), seed in any::<u64>()) {
        let img = Image::from_fn(side, side, c, |y, x, ch| ((y * 5 + x * 3 + ch) % 11) as f32 / 10.0).unwrap();
        for name in CATALOG_NAMES {
            let s = spec(name, side, side);
            let expected = output_shape(&s, Shape::new(side, side, c)).unwrap();
            let out = apply_transform(&img, &s, &mut rng::seeded(seed)).unwrap();
            prop_assert_eq!(out.shape(), expected, "{}", name);
        }
    }

    #[test]
    fn every_transform_is_deterministic_under_a_seed(side in 8usize..33, seed in any::<u64>()) {
        let img = image(side, side, seed);
        for name in CATALOG_NAMES {
            let s = spec(name, side, side);
            let a = apply_transform(&img, &s, &mut rng::seeded(seed)).unwrap();
            let b = apply_transform(&img, &s, &mut rng::seeded(seed)).unwrap();
            prop_assert_eq!(a.data(), b.data(), "{}", name);
        }
    }

    #[test]
    fn pipeline_with_p_zero_is_identity(side in 8usize..33, k in 0usize..=15, seed in any::<u64>()) {
        let set = AugmentationSet::catalog(side, side, 0.5);
        let img = image(side, side, seed);
        let mut r = rng::seeded(seed);
        let subset = sample_subset(&set, SubsetMode::FixedSize { k }, &mut r).unwrap();
        let (out, labels) = apply_pipeline(&img, &set, &subset, 0.0, &mut r).unwrap();
        prop_assert_eq!(out, img);
        prop_assert_eq!(labels.count(), 0);
    }

    #[test]
    fn batch_pipeline_is_deterministic_and_labels_match_subset(side in 16usize..33, k in 0usize..=5, seed in any::<u64>()) {
        let set = AugmentationSet::catalog(side, side, 1.0);
        let batch: Vec<Image> = (0..3).map(|i| image(side, side, seed ^ i)).collect();
        let run = || {
            let mut r = rng::seeded(seed);
            let subset = sample_subset(&set, SubsetMode::FixedSize { k }, &mut r).unwrap();
            let out = apply_pipeline_batch(&batch, None, &set, &subset, 1.0, &mut r).unwrap();
            (subset, out)
        };
        let (subset, a) = run();
        let (_, b) = run();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.labels.count(), subset.len());
        for &i in &subset.indices {
            prop_assert!(a.labels.get(set.specs()[i].transform.index()));
        }
    }
}

#[test]
fn empty_subset_is_identity_for_any_catalog() {
    let img = image(32, 32, 1);
    for p in [0.0, 0.5, 1.0] {
        let set = AugmentationSet::catalog(32, 32, p);
        let (out, labels) = apply_pipeline(&img, &set, &SubsetSample::default(), 1.0, &mut rng::seeded(3)).unwrap();
        assert_eq!(out, img);
        assert_eq!(labels.count(), 0);
    }
}

#[test]
fn horizontal_flip_pixel_example() {
    let img = Image::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let out = apply_transform(&img, &spec("HorizontalFlip", 2, 2), &mut rng::seeded(0)).unwrap();
    assert_eq!(out.data(), &[0.2, 0.1, 0.4, 0.3]);
}

#[test]
fn center_crop_pixel_example() {
    let img = Image::new(4, 4, 1, (0..16).map(|v| v as f32 / 16.0).collect()).unwrap();
    let s = AugmentationSpec::new(Transform::CenterCrop { height: 2, width: 2 }, 1.0);
    let out = apply_transform(&img, &s, &mut rng::seeded(0)).unwrap();
    assert_eq!(out.data(), &[5.0 / 16.0, 6.0 / 16.0, 9.0 / 16.0, 10.0 / 16.0]);
}

#[test]
fn unit_gamma_is_identity() {
    let img = image(8, 8, 2);
    let s = AugmentationSpec::new(
        Transform::RandomGamma {
            gamma_min: 1.0,
            gamma_max: 1.0,
        },
        1.0,
    );
    assert_eq!(apply_transform(&img, &s, &mut rng::seeded(0)).unwrap(), img);
}

#[test]
fn quarter_turn_of_non_square_has_no_static_shape() {
    assert!(output_shape(&spec("RandomRotate90", 8, 8), Shape::new(8, 12, 3)).is_err());
}
