//! Joint networks, losses and optimizers.

mod layers;
mod loss;
mod net;
mod optim;
mod tensor;
mod train;

pub use loss::{
    augmentation_loss, augmentation_loss_with_grad, classification_loss, classification_loss_with_grad,
    segmentation_loss, segmentation_loss_with_grad, total_loss, LossValue,
};
pub use net::{Backbone, ModelHandle, Outputs, ParamLayout, TaskKind, TaskLogits, Widths};
pub use optim::{OptimizerSpec, OptimizerState};
pub use tensor::Tensor;
pub use train::{argmax_predictions, train_step, AugTargets, JointBatch, LossBreakdown, TaskTargets};
