//! Conventional per-dataset augmentation recipes used as the comparison
//! anchor. Each image draws its own randomness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::RngState;
use crate::transform::{
    adjust_brightness, adjust_contrast, crop_plane, hflip_plane, luma, pad_plane, uniform, warp_affine, Affine, Border,
    Image, Interp, Mask, Plane,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum BaselineStep {
    HorizontalFlip { p: f64 },
    /// Zero-pad every side by `pad`, then crop a random window of the
    /// original size.
    PadCrop { pad: usize },
    /// Brightness, contrast and saturation factors drawn from `1 ± strength`.
    ColorJitter { brightness: f64, contrast: f64, saturation: f64 },
    /// With probability `p`, rotate by an angle uniform in `[0, max_deg]`.
    Rotate { max_deg: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecipe {
    pub dataset: String,
    pub steps: Vec<BaselineStep>,
}

/// Padding for pad-and-crop: 4 pixels at 32×32, scaled with the side.
fn pad_for(side: usize) -> usize {
    (side / 8).max(1)
}

pub fn baseline_recipe(dataset: &str, side: usize) -> Result<BaselineRecipe> {
    use BaselineStep::*;
    let steps = match dataset {
        "cifar10" | "cifar100" | "probe" => vec![HorizontalFlip { p: 0.5 }, PadCrop { pad: pad_for(side) }],
        "svhn" => vec![PadCrop { pad: pad_for(side) }],
        "tiny-imagenet" => vec![
            HorizontalFlip { p: 0.5 },
            ColorJitter {
                brightness: 0.4,
                contrast: 0.4,
                saturation: 0.4,
            },
        ],
        "cityscapes" | "seg-probe" => vec![HorizontalFlip { p: 0.5 }, Rotate { max_deg: 20.0, p: 0.5 }],
        other => return Err(Error::InvalidArgument(format!("no baseline recipe for dataset `{other}`"))),
    };
    Ok(BaselineRecipe {
        dataset: dataset.to_string(),
        steps,
    })
}

fn saturation(img: &Image, alpha: f64) -> Image {
    if img.channels() == 1 {
        return img.clone();
    }
    let gray = luma(img);
    let data = img
        .data()
        .chunks_exact(3)
        .zip(&gray)
        .flat_map(|(px, &g)| px.iter().map(move |&v| (alpha * f64::from(v) + (1.0 - alpha) * g) as f32))
        .collect();
    Plane {
        height: img.height(),
        width: img.width(),
        channels: 3,
        data,
    }
    .into_image()
}

impl BaselineRecipe {
    pub fn apply(&self, image: &Image, mask: Option<&Mask>, rng: &mut RngState) -> Result<(Image, Option<Mask>)> {
        let mut img = Plane::from_image(image);
        let mut m = mask.map(Plane::from_mask);
        let mut photometric: Vec<(u8, f64)> = Vec::new();
        for step in &self.steps {
            match *step {
                BaselineStep::HorizontalFlip { p } => {
                    if rng.random::<f64>() < p {
                        img = hflip_plane(&img);
                        m = m.map(|m| hflip_plane(&m));
                    }
                }
                BaselineStep::PadCrop { pad } => {
                    let (h, w) = (img.height, img.width);
                    let top = rng.random_range(0..=2 * pad);
                    let left = rng.random_range(0..=2 * pad);
                    img = crop_plane(&pad_plane(&img, pad, 0.0), top, left, h, w);
                    m = m.map(|m| crop_plane(&pad_plane(&m, pad, f32::from(Mask::IGNORE)), top, left, h, w));
                }
                BaselineStep::ColorJitter {
                    brightness,
                    contrast,
                    saturation,
                } => {
                    photometric.push((0, uniform(rng, 1.0 - brightness, 1.0 + brightness)));
                    photometric.push((1, uniform(rng, 1.0 - contrast, 1.0 + contrast)));
                    photometric.push((2, uniform(rng, 1.0 - saturation, 1.0 + saturation)));
                }
                BaselineStep::Rotate { max_deg, p } => {
                    if rng.random::<f64>() < p {
                        let a = Affine {
                            angle_deg: uniform(rng, 0.0, max_deg),
                            scale: 1.0,
                            dx: 0.0,
                            dy: 0.0,
                        };
                        img = warp_affine(&img, a, Interp::Bilinear, Border::Constant(0.0));
                        m = m.map(|m| warp_affine(&m, a, Interp::Nearest, Border::Constant(f32::from(Mask::IGNORE))));
                    }
                }
            }
        }
        let mut out = img.into_image();
        for (kind, factor) in photometric {
            out = match kind {
                0 => adjust_brightness(&out, factor),
                1 => adjust_contrast(&out, factor),
                _ => saturation(&out, factor),
            };
        }
        Ok((out, m.map(Plane::into_mask)))
    }
}
