use rand::Rng;

use super::catalog::{AugmentationLabelVector, AugmentationSet, Transform};
use super::image::{Image, Mask};
use super::ops::{check_mask, resolve};
use super::sampler::SubsetSample;
use crate::rng::RngState;
use crate::{Error, Result};

/// Images (and masks) after a batch pipeline, plus the transforms that fired.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub images: Vec<Image>,
    pub masks: Option<Vec<Mask>>,
    pub labels: AugmentationLabelVector,
}

/// Runs `subset` over a single image; each transform fires independently
/// with probability `p`.
pub fn apply_pipeline(
    image: &Image,
    set: &AugmentationSet,
    subset: &SubsetSample,
    p: f64,
    rng: &mut RngState,
) -> Result<(Image, AugmentationLabelVector)> {
    let mut out = apply_pipeline_batch(std::slice::from_ref(image), None, set, subset, p, rng)?;
    Ok((out.images.pop().expect("one image"), out.labels))
}

/// Runs `subset` over a whole batch.
///
/// Firing is decided once per batch, so every item shares one label vector.
/// Crops (and quarter turns of non-square images) draw one geometry for the
/// batch to keep shapes rectangular; every other transform draws its
/// magnitudes per image.
pub fn apply_pipeline_batch(
    images: &[Image],
    masks: Option<&[Mask]>,
    set: &AugmentationSet,
    subset: &SubsetSample,
    p: f64,
    rng: &mut RngState,
) -> Result<PipelineOutput> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let Some(first) = images.first() else {
        return Err(Error::EmptyDataset("empty batch".into()));
    };
    if images.iter().any(|i| i.shape() != first.shape()) {
        return Err(Error::ShapeMismatch("batch images differ in shape".into()));
    }
    if let Some(ms) = masks {
        if ms.len() != images.len() {
            return Err(Error::ShapeMismatch(format!("{} images vs {} masks", images.len(), ms.len())));
        }
        for (i, m) in images.iter().zip(ms) {
            check_mask(i, m)?;
        }
    }
    let mut seen = vec![false; set.len()];
    for &i in &subset.indices {
        if i >= set.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("invalid subset index {i}")));
        }
    }

    let mut cur: Vec<Image> = images.to_vec();
    let mut cur_masks: Option<Vec<Mask>> = masks.map(<[Mask]>::to_vec);
    let mut labels = AugmentationLabelVector::zeros();
    for &i in &subset.indices {
        let spec = &set.specs()[i];
        let fired = rng.random::<f64>() < p;
        if !fired {
            continue;
        }
        labels.set(spec.transform.index());
        let shape = cur[0].shape();
        let batch_level = spec.transform.is_crop()
            || (matches!(spec.transform, Transform::RandomRotate90) && shape.height != shape.width);
        let shared = if batch_level {
            Some(resolve(&spec.transform, shape, rng)?)
        } else {
            None
        };
        for (j, img) in cur.iter_mut().enumerate() {
            let op = match &shared {
                Some(op) => op.clone(),
                None => resolve(&spec.transform, img.shape(), rng)?,
            };
            if let Some(ms) = cur_masks.as_mut() {
                ms[j] = op.apply_mask(&ms[j]);
            }
            *img = op.apply(img);
        }
    }
    Ok(PipelineOutput {
        images: cur,
        masks: cur_masks,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::transform::sampler::{sample_subset, SubsetMode};

    fn img() -> Image {
        Image::from_fn(32, 32, 3, |y, x, c| ((y * 7 + x * 3 + c) % 13) as f32 / 13.0).unwrap()
    }

    #[test]
    fn empty_subset_is_identity() {
        let set = AugmentationSet::catalog(32, 32, 0.5);
        let (out, labels) = apply_pipeline(&img(), &set, &SubsetSample::default(), 1.0, &mut rng::seeded(0)).unwrap();
        assert_eq!(out, img());
        assert_eq!(labels.count(), 0);
    }

    #[test]
    fn forced_flip_sets_one_bit() {
        let set = AugmentationSet::catalog(32, 32, 0.5);
        let subset = SubsetSample { indices: vec![0] };
        let (_, labels) = apply_pipeline(&img(), &set, &subset, 1.0, &mut rng::seeded(0)).unwrap();
        assert_eq!(labels.fired_names(), vec!["HorizontalFlip"]);
    }

    #[test]
    fn crops_share_geometry_across_the_batch() {
        let set = AugmentationSet::catalog(32, 32, 0.5).restrict(&["RandomCrop", "RandomSizedCrop"]).unwrap();
        let batch: Vec<Image> = (0..4).map(|_| img()).collect();
        let mut r = rng::seeded(9);
        let subset = sample_subset(&set, SubsetMode::FixedSize { k: 2 }, &mut r).unwrap();
        let out = apply_pipeline_batch(&batch, None, &set, &subset, 1.0, &mut r).unwrap();
        for o in &out.images[1..] {
            assert_eq!(o, &out.images[0]);
        }
        assert_eq!(out.images[0].height(), 25);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let set = AugmentationSet::catalog(32, 32, 0.5);
        let subset = SubsetSample { indices: vec![1, 1] };
        assert!(apply_pipeline(&img(), &set, &subset, 1.0, &mut rng::seeded(0)).is_err());
        let subset = SubsetSample { indices: vec![15] };
        assert!(apply_pipeline(&img(), &set, &subset, 1.0, &mut rng::seeded(0)).is_err());
        assert!(apply_pipeline(&img(), &set, &SubsetSample::default(), 1.5, &mut rng::seeded(0)).is_err());
    }
}
