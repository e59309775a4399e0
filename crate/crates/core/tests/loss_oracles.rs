//! The three losses against element-wise compensated-sum oracles.

mod common;

use proptest::prelude::*;
use safeaug::model::{augmentation_loss, classification_loss, segmentation_loss, total_loss};

fn logits(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-12.0f64..12.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bce_matches_oracle((x, y) in (1usize..40).prop_flat_map(|n| (logits(n), prop::collection::vec(prop::bool::ANY, n)))) {
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let got = augmentation_loss(&x, &y).unwrap().value();
        prop_assert!((got - common::bce_oracle(&x, &y)).abs() <= 1e-6);
    }

    #[test]
    fn softmax_ce_matches_oracle(
        (k, x, labels) in (2usize..12, 1usize..8)
            .prop_flat_map(|(k, n)| (Just(k), logits(k * n), prop::collection::vec(0..k, n)))
    ) {
        let got = classification_loss(&x, k, &labels).unwrap().value();
        prop_assert!((got - common::ce_oracle(&x, k, &labels)).abs() <= 1e-6);
    }

    #[test]
    fn segmentation_ce_matches_oracle(
        (k, n, hw, x, masks) in (2usize..5, 1usize..3, 1usize..10).prop_flat_map(|(k, n, hw)| {
            let labels = prop::collection::vec(prop_oneof![9 => 0..k as u8, 1 => Just(255u8)], n * hw);
            (Just(k), Just(n), Just(hw), logits(k * n * hw), labels)
        })
    ) {
        let _ = hw;
        let got = segmentation_loss(&x, k, &masks, n, 255).unwrap().value();
        prop_assert!((got - common::seg_oracle(&x, k, &masks, n, 255)).abs() <= 1e-6);
    }

    #[test]
    fn uniform_logits_give_log_of_class_count(k in 2usize..30, c in -5.0f64..5.0, n in 1usize..6) {
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let ce = classification_loss(&vec![c; k * n], k, &labels).unwrap().value();
        prop_assert!((ce - (k as f64).ln()).abs() <= 1e-12);
        let masks: Vec<u8> = (0..n).map(|i| (i % k) as u8).collect();
        let seg = segmentation_loss(&vec![c; k * n], k, &masks, n, 255).unwrap().value();
        prop_assert!((seg - (k as f64).ln()).abs() <= 1e-12);
    }

    #[test]
    fn total_is_the_sum(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        use safeaug::model::LossValue;
        let t = total_loss(LossValue::new(a).unwrap(), LossValue::new(b).unwrap()).value();
        prop_assert_eq!(t, a + b);
    }
}

#[test]
fn zero_logits_give_ln2_for_any_targets() {
    for ones in 0..=15 {
        let y: Vec<f64> = (0..15).map(|i| f64::from(u8::from(i < ones))).collect();
        let l = augmentation_loss(&[0.0; 15], &y).unwrap().value();
        assert!((l - std::f64::consts::LN_2).abs() <= 1e-12);
    }
}

#[test]
fn toy_segmentation_value() {
    // 1×2 image, K=2: pixel logits (2,0) with label 0 and (0,0) with label 1
    let l = segmentation_loss(&[2.0, 0.0, 0.0, 0.0], 2, &[0, 1], 1, 255).unwrap().value();
    let expected = ((1.0 + (-2.0f64).exp()).ln() + 2f64.ln()) / 2.0;
    assert!((l - expected).abs() <= 1e-12);
}
