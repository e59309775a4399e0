//! The augmentation catalog and the machinery that applies it.

mod catalog;
mod clahe;
mod cutout;
mod geometry;
mod image;
mod ops;
mod photometric;
mod pipeline;
mod sampler;

pub use catalog::{
    catalog_index, default_crop_size, label_mapping, AugmentationLabelVector, AugmentationSet, AugmentationSpec,
    Transform, CATALOG_NAMES, NUM_TRANSFORMS,
};
pub use cutout::apply_cutout;
pub use image::{Image, Mask, Shape};
pub use ops::{apply_transform, apply_transform_with_mask, output_shape, resize_image, resize_mask, rotate90};
pub use pipeline::{apply_pipeline, apply_pipeline_batch, PipelineOutput};
pub use sampler::{sample_subset, SubsetMode, SubsetSample};

pub(crate) use geometry::{crop as crop_plane, hflip as hflip_plane, pad as pad_plane, warp_affine, Affine, Border, Interp};
pub(crate) use image::Plane;
pub(crate) use photometric::{brightness as adjust_brightness, contrast as adjust_contrast, luma, uniform};
