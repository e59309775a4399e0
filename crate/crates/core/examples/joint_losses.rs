//! The joint objective on one batch: L_total = L_augm + L_task, then a
//! few optimizer steps on that batch.

use safeaug::model::{
    augmentation_loss, classification_loss, train_step, AugTargets, Backbone, JointBatch, ModelHandle, OptimizerSpec,
    OptimizerState, TaskTargets, Tensor,
};
use safeaug::transform::{catalog_index, AugmentationLabelVector, Shape};

fn main() -> safeaug::Result<()> {
    let logits = [2.0, -1.0, 0.0];
    let targets = [1.0, 0.0, 1.0];
    println!("BCE of {logits:?} vs {targets:?}: {:.6}", augmentation_loss(&logits, &targets)?.value());
    println!("CE of uniform logits over 10 classes: {:.6}", classification_loss(&[0.0; 10], 10, &[3])?.value());

    let mut model = ModelHandle::new(Backbone::Tiny, Shape::new(16, 16, 3), 4, 0)?;
    let n = 8;
    let data = (0..n * 3 * 16 * 16).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
    let mut labels = AugmentationLabelVector::zeros();
    labels.set(catalog_index("VerticalFlip")?);
    labels.set(catalog_index("Blur")?);
    let batch = JointBatch {
        images: Tensor::from_vec(n, 3, 16, 16, data)?,
        aug_labels: Some(AugTargets::PerBatch(labels)),
        task: TaskTargets::Classes((0..n).map(|i| i % 4).collect()),
    };
    let mut opt = OptimizerState::new(OptimizerSpec::sgd_default(), model.params.len());
    for step in 0..5 {
        let l = train_step(&mut model, &batch, &mut opt)?;
        println!(
            "step {step}: l_augm {:.4} + l_task {:.4} = {:.4}",
            l.l_augm.unwrap_or(0.0),
            l.l_task,
            l.l_total
        );
    }
    Ok(())
}
