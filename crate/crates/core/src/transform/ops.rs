//! Resolution of random magnitudes and application of single transforms.

use rand::Rng;

use super::catalog::{AugmentationSpec, Transform};
use super::clahe::clahe;
use super::geometry::{self, Affine, Border, Interp};
use super::image::{Image, Mask, Plane, Shape};
use super::photometric::{self, uniform};
use crate::rng::{self, RngState};
use crate::{Error, Result};

/// A transform with every random magnitude drawn.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Resolved {
    HFlip,
    VFlip,
    Rot90(u8),
    Transpose,
    Gray,
    Affine(Affine),
    Crop {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
        resize_to: Option<(usize, usize)>,
    },
    Contrast(f64),
    Brightness(f64),
    Gamma(f64),
    Clahe { clip: f64, grid: usize },
    Blur(usize),
    Noise { sigma: f64, seed: u64 },
}

pub(crate) fn resolve(t: &Transform, shape: Shape, rng: &mut RngState) -> Result<Resolved> {
    t.validate()?;
    let (h, w) = (shape.height, shape.width);
    let too_large = |ch: usize, cw: usize| Error::CropTooLarge {
        crop_h: ch,
        crop_w: cw,
        height: h,
        width: w,
    };
    Ok(match *t {
        Transform::HorizontalFlip => Resolved::HFlip,
        Transform::VerticalFlip => Resolved::VFlip,
        Transform::RandomRotate90 => Resolved::Rot90(rng.random_range(0..4u8)),
        Transform::Transpose => Resolved::Transpose,
        Transform::ToGray => Resolved::Gray,
        Transform::ShiftScaleRotate {
            shift_limit,
            scale_limit,
            rotate_limit,
        } => Resolved::Affine(Affine {
            angle_deg: uniform(rng, -rotate_limit, rotate_limit),
            scale: uniform(rng, 1.0 - scale_limit, 1.0 + scale_limit),
            dx: uniform(rng, -shift_limit, shift_limit),
            dy: uniform(rng, -shift_limit, shift_limit),
        }),
        Transform::RandomCrop { height, width } => {
            if height == 0 || width == 0 || height > h || width > w {
                return Err(too_large(height, width));
            }
            Resolved::Crop {
                top: rng.random_range(0..=h - height),
                left: rng.random_range(0..=w - width),
                height,
                width,
                resize_to: None,
            }
        }
        Transform::CenterCrop { height, width } => {
            if height == 0 || width == 0 || height > h || width > w {
                return Err(too_large(height, width));
            }
            Resolved::Crop {
                top: (h - height) / 2,
                left: (w - width) / 2,
                height,
                width,
                resize_to: None,
            }
        }
        Transform::RandomSizedCrop {
            min_height,
            max_height,
            height,
            width,
            w2h_ratio,
        } => {
            if min_height > h {
                return Err(too_large(min_height, min_height));
            }
            let side = rng.random_range(min_height..=max_height.min(h));
            let crop_w = ((side as f64 * w2h_ratio).round() as usize).max(1);
            if crop_w > w {
                return Err(too_large(side, crop_w));
            }
            Resolved::Crop {
                top: rng.random_range(0..=h - side),
                left: rng.random_range(0..=w - crop_w),
                height: side,
                width: crop_w,
                resize_to: Some((height, width)),
            }
        }
        Transform::RandomContrast { limit } => Resolved::Contrast(uniform(rng, 1.0 - limit, 1.0 + limit)),
        Transform::RandomBrightness { limit } => Resolved::Brightness(uniform(rng, 1.0 - limit, 1.0 + limit)),
        Transform::RandomGamma { gamma_min, gamma_max } => Resolved::Gamma(uniform(rng, gamma_min, gamma_max)),
        Transform::Clahe { clip_limit, tile_grid } => {
            if shape.channels != 1 && shape.channels != 3 {
                return Err(Error::UnsupportedChannels {
                    transform: "CLAHE".into(),
                    channels: shape.channels,
                });
            }
            Resolved::Clahe {
                clip: uniform(rng, 1.0, clip_limit),
                grid: tile_grid,
            }
        }
        Transform::Blur { blur_limit } => {
            let sizes: Vec<usize> = (3..=blur_limit).step_by(2).collect();
            Resolved::Blur(sizes[rng.random_range(0..sizes.len())])
        }
        Transform::GaussNoise { var_min, var_max } => Resolved::Noise {
            sigma: uniform(rng, var_min, var_max).sqrt() / 255.0,
            seed: rng.random(),
        },
    })
}

impl Resolved {
    pub(crate) fn apply(&self, img: &Image) -> Image {
        match self {
            Resolved::Gray => photometric::to_gray(img),
            Resolved::Contrast(a) => photometric::contrast(img, *a),
            Resolved::Brightness(a) => photometric::brightness(img, *a),
            Resolved::Gamma(g) => photometric::gamma(img, *g),
            Resolved::Clahe { clip, grid } => clahe(img, *clip, *grid),
            Resolved::Blur(k) => photometric::box_blur(img, *k),
            Resolved::Noise { sigma, seed } => photometric::gauss_noise(img, *sigma, &mut rng::seeded(*seed)),
            geometric => geometric.warp(&Plane::from_image(img), Interp::Bilinear).into_image(),
        }
    }

    /// Masks follow geometric transforms with nearest-neighbour sampling and
    /// ignore photometric ones.
    pub(crate) fn apply_mask(&self, mask: &Mask) -> Mask {
        if self.is_photometric() {
            return mask.clone();
        }
        self.warp(&Plane::from_mask(mask), Interp::Nearest).into_mask()
    }

    fn is_photometric(&self) -> bool {
        matches!(
            self,
            Resolved::Gray
                | Resolved::Contrast(_)
                | Resolved::Brightness(_)
                | Resolved::Gamma(_)
                | Resolved::Clahe { .. }
                | Resolved::Blur(_)
                | Resolved::Noise { .. }
        )
    }

    fn warp(&self, p: &Plane, interp: Interp) -> Plane {
        match *self {
            Resolved::HFlip => geometry::hflip(p),
            Resolved::VFlip => geometry::vflip(p),
            Resolved::Rot90(k) => geometry::rot90(p, k),
            Resolved::Transpose => geometry::transpose(p),
            Resolved::Affine(a) => geometry::warp_affine(p, a, interp, Border::Reflect101),
            Resolved::Crop {
                top,
                left,
                height,
                width,
                resize_to,
            } => {
                let cropped = geometry::crop(p, top, left, height, width);
                match resize_to {
                    Some((rh, rw)) => geometry::resize(&cropped, rh, rw, interp),
                    None => cropped,
                }
            }
            _ => p.clone(),
        }
    }
}

/// Applies one transform with freshly drawn magnitudes. The input is not
/// modified.
pub fn apply_transform(image: &Image, spec: &AugmentationSpec, rng: &mut RngState) -> Result<Image> {
    Ok(resolve(&spec.transform, image.shape(), rng)?.apply(image))
}

/// Like [`apply_transform`], moving a segmentation mask along with any
/// geometric change.
pub fn apply_transform_with_mask(
    image: &Image,
    mask: &Mask,
    spec: &AugmentationSpec,
    rng: &mut RngState,
) -> Result<(Image, Mask)> {
    check_mask(image, mask)?;
    let op = resolve(&spec.transform, image.shape(), rng)?;
    Ok((op.apply(image), op.apply_mask(mask)))
}

pub fn output_shape(spec: &AugmentationSpec, input: Shape) -> Result<Shape> {
    spec.transform.output_shape(input)
}

/// Quarter-turn rotation by an explicit `k` (counter-clockwise).
pub fn rotate90(image: &Image, k: u8) -> Image {
    Resolved::Rot90(k).apply(image)
}

/// Bilinear resize, used to bring size-changed images back to the model
/// resolution after a pipeline.
pub fn resize_image(image: &Image, height: usize, width: usize) -> Image {
    geometry::resize(&Plane::from_image(image), height, width, Interp::Bilinear).into_image()
}

pub fn resize_mask(mask: &Mask, height: usize, width: usize) -> Mask {
    geometry::resize(&Plane::from_mask(mask), height, width, Interp::Nearest).into_mask()
}

pub(crate) fn check_mask(image: &Image, mask: &Mask) -> Result<()> {
    if image.height() != mask.height() || image.width() != mask.width() {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs mask {}x{}",
            image.height(),
            image.width(),
            mask.height(),
            mask.width()
        )));
    }
    Ok(())
}
