//! Central finite differences against the hand-written backward pass.

mod common;

use safeaug::model::Backbone;
use safeaug::transform::Shape;

#[test]
fn tiny_classifier_gradients_match_finite_differences() {
    let worst = common::gradient_check(Backbone::Tiny, Shape::new(8, 8, 3), 4, 1, 20);
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn tiny_segmenter_gradients_match_finite_differences() {
    let worst = common::gradient_check(Backbone::TinySeg, Shape::new(6, 6, 3), 3, 2, 20);
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn augmentation_head_gradients_match_finite_differences() {
    // every aug-head bias, so the joint term is covered even when the
    // random draw above misses the head
    use rand::SeedableRng;
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let model = safeaug::model::ModelHandle::new(Backbone::Tiny, Shape::new(8, 8, 3), 4, 3).unwrap();
    let batch = common::random_batch(&model, &mut r, 2);
    let (_, grad) = model.loss_and_grad(&batch).unwrap();
    let layout = model.layout();
    let mut offset = 0;
    for (name, len) in &layout.blocks {
        if name == "aug_head.bias" {
            for i in offset..offset + len {
                let h = 1e-5;
                let mut plus = model.clone();
                plus.params[i] += h;
                let mut minus = model.clone();
                minus.params[i] -= h;
                let numeric = (plus.loss_and_grad(&batch).unwrap().0.l_total
                    - minus.loss_and_grad(&batch).unwrap().0.l_total)
                    / (2.0 * h);
                assert!(common::rel_err(grad[i], numeric) <= 1e-4, "param {i}");
            }
        }
        offset += len;
    }
}
