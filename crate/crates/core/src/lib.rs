//! Learning distribution-preserving ("safe") image augmentations.
//!
//! A small CNN is trained jointly on its main task and on predicting which
//! transforms were applied to each batch. Transforms the model can neither
//! detect on augmented data nor hallucinate on clean data are kept as the
//! safe set, which is then used for fine-tuning or combined with baseline
//! augmentation and Cutout.
//!
//! Module map:
//! - [`transform`]: the 15-transform catalog, Cutout, subset sampling and
//!   batch pipelines that report which transforms fired.
//! - [`model`]: tiny joint networks with hand-written backprop, the three
//!   losses and the optimizers.
//! - [`analyzer`]: clean-set false positives, augmented-set accuracy,
//!   threshold selection and reports.
//! - [`data`]: dataset adapters, synthetic probes, checkpoints and the run
//!   registry.
//! - [`workflows`]: learn-safe, train, fine-tune, combined and sweep runs.
//! - [`cli`]: the `safeaug` command line.

pub mod analyzer;
pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod rng;
pub mod transform;
pub mod workflows;

pub use error::{Error, Result};
