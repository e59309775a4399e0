use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::Shape;
use crate::{Error, Result};

/// Number of transforms in the catalog; also the width of every label vector.
pub const NUM_TRANSFORMS: usize = 15;

/// Catalog names in label-index order.
pub const CATALOG_NAMES: [&str; NUM_TRANSFORMS] = [
    "HorizontalFlip",
    "VerticalFlip",
    "RandomRotate90",
    "Transpose",
    "ToGray",
    "ShiftScaleRotate",
    "RandomCrop",
    "CenterCrop",
    "RandomSizedCrop",
    "RandomContrast",
    "RandomBrightness",
    "RandomGamma",
    "CLAHE",
    "Blur",
    "GaussNoise",
];

/// A catalog transform together with its magnitude parameters.
///
/// Defaults follow the conventional albumentations-style magnitudes; see
/// [`Transform::default_for`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Transform {
    HorizontalFlip,
    VerticalFlip,
    /// Rotates by a uniformly drawn number of quarter turns in `0..4`.
    RandomRotate90,
    Transpose,
    /// Luminance (BT.601 weights) replicated into every channel.
    ToGray,
    /// Random affine: shift up to `shift_limit` of each side, scale factor in
    /// `1 ± scale_limit`, rotation within `±rotate_limit` degrees. Bilinear,
    /// reflect-101 borders.
    ShiftScaleRotate {
        shift_limit: f64,
        scale_limit: f64,
        rotate_limit: f64,
    },
    RandomCrop {
        height: usize,
        width: usize,
    },
    CenterCrop {
        height: usize,
        width: usize,
    },
    /// Crops a random `side×(side·w2h_ratio)` window with `side` drawn from
    /// `[min_height, max_height]` (capped at the image height), then resizes
    /// to `height×width`.
    RandomSizedCrop {
        min_height: usize,
        max_height: usize,
        height: usize,
        width: usize,
        w2h_ratio: f64,
    },
    /// `alpha·x + (1 − alpha)·mean(gray)` with `alpha ∈ 1 ± limit`.
    RandomContrast { limit: f64 },
    /// Multiplicative factor in `1 ± limit`.
    RandomBrightness { limit: f64 },
    /// `x^gamma` with `gamma ∈ [gamma_min, gamma_max]`.
    RandomGamma { gamma_min: f64, gamma_max: f64 },
    /// Contrast-limited adaptive histogram equalization on luma; clip limit
    /// drawn from `[1, clip_limit]`.
    #[serde(rename = "CLAHE")]
    Clahe { clip_limit: f64, tile_grid: usize },
    /// Box blur with an odd kernel size drawn from `3..=blur_limit`.
    Blur { blur_limit: usize },
    /// Additive Gaussian noise; variance drawn from `[var_min, var_max]` on the
    /// 8-bit scale.
    GaussNoise { var_min: f64, var_max: f64 },
}

impl Transform {
    /// Default-magnitude transform for images of the given resolution.
    ///
    /// Crops target `crop×crop` where `crop` comes from
    /// [`default_crop_size`].
    pub fn default_for(name: &str, height: usize, width: usize) -> Result<Self> {
        let crop_h = default_crop_size(height);
        let crop_w = default_crop_size(width);
        Ok(match name {
            "HorizontalFlip" => Transform::HorizontalFlip,
            "VerticalFlip" => Transform::VerticalFlip,
            "RandomRotate90" => Transform::RandomRotate90,
            "Transpose" => Transform::Transpose,
            "ToGray" => Transform::ToGray,
            "ShiftScaleRotate" => Transform::ShiftScaleRotate {
                shift_limit: 0.0625,
                scale_limit: 0.1,
                rotate_limit: 45.0,
            },
            "RandomCrop" => Transform::RandomCrop {
                height: crop_h,
                width: crop_w,
            },
            "CenterCrop" => Transform::CenterCrop {
                height: crop_h,
                width: crop_w,
            },
            "RandomSizedCrop" => Transform::RandomSizedCrop {
                min_height: crop_h,
                max_height: height,
                height: crop_h,
                width: crop_w,
                w2h_ratio: 1.0,
            },
            "RandomContrast" => Transform::RandomContrast { limit: 0.2 },
            "RandomBrightness" => Transform::RandomBrightness { limit: 0.2 },
            "RandomGamma" => Transform::RandomGamma {
                gamma_min: 0.8,
                gamma_max: 1.2,
            },
            "CLAHE" => Transform::Clahe {
                clip_limit: 4.0,
                tile_grid: 8,
            },
            "Blur" => Transform::Blur { blur_limit: 7 },
            "GaussNoise" => Transform::GaussNoise {
                var_min: 10.0,
                var_max: 50.0,
            },
            other => return Err(Error::UnknownTransform(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        CATALOG_NAMES[self.index()]
    }

    /// Position of this transform in every label vector.
    pub fn index(&self) -> usize {
        match self {
            Transform::HorizontalFlip => 0,
            Transform::VerticalFlip => 1,
            Transform::RandomRotate90 => 2,
            Transform::Transpose => 3,
            Transform::ToGray => 4,
            Transform::ShiftScaleRotate { .. } => 5,
            Transform::RandomCrop { .. } => 6,
            Transform::CenterCrop { .. } => 7,
            Transform::RandomSizedCrop { .. } => 8,
            Transform::RandomContrast { .. } => 9,
            Transform::RandomBrightness { .. } => 10,
            Transform::RandomGamma { .. } => 11,
            Transform::Clahe { .. } => 12,
            Transform::Blur { .. } => 13,
            Transform::GaussNoise { .. } => 14,
        }
    }

    /// Transforms that only change pixel values, never the shape.
    pub fn is_photometric(&self) -> bool {
        matches!(
            self,
            Transform::ToGray
                | Transform::RandomContrast { .. }
                | Transform::RandomBrightness { .. }
                | Transform::RandomGamma { .. }
                | Transform::Clahe { .. }
                | Transform::Blur { .. }
                | Transform::GaussNoise { .. }
        )
    }

    /// Crops draw one geometry per batch.
    pub fn is_crop(&self) -> bool {
        matches!(
            self,
            Transform::RandomCrop { .. } | Transform::CenterCrop { .. } | Transform::RandomSizedCrop { .. }
        )
    }

    /// Shape after applying this transform to an input of `input` shape.
    ///
    /// `RandomRotate90` on a non-square input may or may not swap the axes;
    /// it is reported as an error because the result is not static.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.height == 0 || input.width == 0 || !(input.channels == 1 || input.channels == 3) {
            return Err(Error::InvalidImage(format!("invalid shape {input}")));
        }
        let fits = |h: usize, w: usize| -> Result<()> {
            if h == 0 || w == 0 || h > input.height || w > input.width {
                Err(Error::CropTooLarge {
                    crop_h: h,
                    crop_w: w,
                    height: input.height,
                    width: input.width,
                })
            } else {
                Ok(())
            }
        };
        match *self {
            Transform::Transpose => Ok(Shape::new(input.width, input.height, input.channels)),
            Transform::RandomRotate90 if input.height != input.width => Err(Error::ShapeMismatch(
                format!("RandomRotate90 needs a square input to have a static shape, got {input}"),
            )),
            Transform::RandomCrop { height, width } | Transform::CenterCrop { height, width } => {
                fits(height, width)?;
                Ok(Shape::new(height, width, input.channels))
            }
            Transform::RandomSizedCrop {
                min_height,
                height,
                width,
                w2h_ratio,
                ..
            } => {
                if height == 0 || width == 0 {
                    return Err(Error::InvalidArgument("RandomSizedCrop target must be positive".into()));
                }
                let min_w = ((min_height as f64) * w2h_ratio).round() as usize;
                fits(min_height, min_w.max(1))?;
                Ok(Shape::new(height, width, input.channels))
            }
            _ => Ok(input),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("{}: {msg}", self.name())));
        match *self {
            Transform::ShiftScaleRotate {
                shift_limit,
                scale_limit,
                rotate_limit,
            } => {
                if !(0.0..1.0).contains(&shift_limit) || !(0.0..1.0).contains(&scale_limit) || rotate_limit < 0.0 {
                    return bad(format!("limits {shift_limit}/{scale_limit}/{rotate_limit}"));
                }
            }
            Transform::RandomSizedCrop {
                min_height,
                max_height,
                w2h_ratio,
                ..
            } => {
                if min_height == 0 || min_height > max_height || w2h_ratio <= 0.0 {
                    return bad(format!("heights {min_height}..{max_height}, ratio {w2h_ratio}"));
                }
            }
            Transform::RandomContrast { limit } | Transform::RandomBrightness { limit } => {
                if !(0.0..1.0).contains(&limit) {
                    return bad(format!("limit {limit}"));
                }
            }
            Transform::RandomGamma { gamma_min, gamma_max } => {
                if gamma_min <= 0.0 || gamma_min > gamma_max {
                    return bad(format!("gamma range [{gamma_min}, {gamma_max}]"));
                }
            }
            Transform::Clahe { clip_limit, tile_grid } => {
                if clip_limit < 1.0 || tile_grid == 0 {
                    return bad(format!("clip {clip_limit}, grid {tile_grid}"));
                }
            }
            Transform::Blur { blur_limit } => {
                if blur_limit < 3 {
                    return bad(format!("blur_limit {blur_limit}"));
                }
            }
            Transform::GaussNoise { var_min, var_max }
                if (var_min < 0.0 || var_min > var_max) => {
                    return bad(format!("variance range [{var_min}, {var_max}]"));
                }
            _ => {}
        }
        Ok(())
    }
}

/// Crop side used by the default catalog: 25 for 32-pixel sides, 50 for 64,
/// i.e. `round(side · 25/32)`.
pub fn default_crop_size(side: usize) -> usize {
    ((side as f64) * 25.0 / 32.0).round().max(1.0) as usize
}

/// One catalog entry: a transform and its default application probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    #[serde(flatten)]
    pub transform: Transform,
    pub probability: f64,
}

impl AugmentationSpec {
    pub fn new(transform: Transform, probability: f64) -> Self {
        Self {
            transform,
            probability,
        }
    }

    pub fn name(&self) -> &'static str {
        self.transform.name()
    }
}

/// An ordered collection of distinct catalog transforms.
///
/// Label semantics never depend on the order here: bit `i` of a label vector
/// always refers to `CATALOG_NAMES[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSet {
    #[serde(rename = "transform")]
    specs: Vec<AugmentationSpec>,
}

impl AugmentationSet {
    pub fn new(specs: Vec<AugmentationSpec>) -> Result<Self> {
        let mut seen = [false; NUM_TRANSFORMS];
        for spec in &specs {
            spec.transform.validate()?;
            if !(0.0..=1.0).contains(&spec.probability) {
                return Err(Error::InvalidArgument(format!(
                    "{}: probability {} outside [0, 1]",
                    spec.name(),
                    spec.probability
                )));
            }
            let i = spec.transform.index();
            if seen[i] {
                return Err(Error::InvalidArgument(format!("duplicate transform {}", spec.name())));
            }
            seen[i] = true;
        }
        Ok(Self { specs })
    }

    /// The full 15-transform catalog at default magnitudes for `height×width`
    /// inputs, each with probability `p`.
    pub fn catalog(height: usize, width: usize, p: f64) -> Self {
        let specs = CATALOG_NAMES
            .iter()
            .map(|n| AugmentationSpec::new(Transform::default_for(n, height, width).expect("catalog name"), p))
            .collect();
        Self { specs }
    }

    /// The entries of `catalog` whose names appear in `names`, in catalog order.
    pub fn restrict<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        for n in names {
            if !CATALOG_NAMES.contains(&n.as_ref()) {
                return Err(Error::UnknownTransform(n.as_ref().to_string()));
            }
        }
        let specs = self
            .specs
            .iter()
            .filter(|s| names.iter().any(|n| n.as_ref() == s.name()))
            .cloned()
            .collect();
        Self::new(specs)
    }

    pub fn empty() -> Self {
        Self { specs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[AugmentationSpec] {
        &self.specs
    }

    pub fn get(&self, i: usize) -> Option<&AugmentationSpec> {
        self.specs.get(i)
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name().to_string()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name() == name)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: AugmentationSet = toml::from_str(text)?;
        Self::new(raw.specs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// The catalog's name → label-index mapping, emitted next to every report.
pub fn label_mapping() -> Vec<String> {
    CATALOG_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn catalog_index(name: &str) -> Result<usize> {
    CATALOG_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::UnknownTransform(name.to_string()))
}

/// Which transforms actually fired on a batch; bit `i` ↔ `CATALOG_NAMES[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AugmentationLabelVector(pub [bool; NUM_TRANSFORMS]);

impl AugmentationLabelVector {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn set(&mut self, index: usize) {
        self.0[index] = true;
    }

    pub fn get(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn as_f64(&self) -> [f64; NUM_TRANSFORMS] {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn fired_names(&self) -> Vec<&'static str> {
        (0..NUM_TRANSFORMS).filter(|&i| self.0[i]).map(|i| CATALOG_NAMES[i]).collect()
    }
}
