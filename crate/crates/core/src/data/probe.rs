//! Synthetic datasets with planted ground truth.
//!
//! Classification probe: each class is a sinusoidal grating with a fixed
//! integer wave vector (horizontal, vertical and the two diagonals), drawn
//! with a random phase. Gratings complete an integer number of cycles over
//! each image half, so they contribute nothing to half-image means.
//! Asymmetries add a fixed intensity ramp; nuisances randomize a property in
//! the raw data.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::checksum::{verify_manifest, write_manifest};
use super::{DatasetHandle, Split, Targets};
use crate::model::TaskKind;
use crate::rng;
use crate::transform::{Image, Mask};
use crate::{Error, Result};

/// A property randomized i.i.d. in the raw images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nuisance {
    /// Global multiplicative brightness, log-uniform in `[min, max]`.
    Brightness { min: f64, max: f64 },
    /// Each image is mirrored left-right with probability 1/2.
    HorizontalMirror,
}

impl Nuisance {
    /// The catalog transform this nuisance masks.
    pub fn affects(&self) -> &'static str {
        match self {
            Nuisance::Brightness { .. } => "RandomBrightness",
            Nuisance::HorizontalMirror => "HorizontalFlip",
        }
    }
}

/// A structure shared by every image that a transform breaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Asymmetry {
    /// Top rows brighter than bottom rows by `strength` (before brightness).
    VerticalGradient { strength: f64 },
    /// Left columns brighter than right columns by `strength`.
    HorizontalGradient { strength: f64 },
}

impl Asymmetry {
    /// The catalog transform this asymmetry exposes.
    pub fn affects(&self) -> &'static str {
        match self {
            Asymmetry::VerticalGradient { .. } => "VerticalFlip",
            Asymmetry::HorizontalGradient { .. } => "HorizontalFlip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProbeSpec {
    /// Total images; `test_fraction` of them form the test split and a
    /// tenth of the rest the validation split.
    pub samples: usize,
    pub image_size: usize,
    /// 2 or 4 grating orientations.
    pub classes: usize,
    /// Cycles across the image along each non-zero wave-vector axis; even.
    pub cycles: usize,
    pub base: f64,
    pub amplitude: f64,
    pub noise_std: f64,
    pub nuisances: Vec<Nuisance>,
    pub asymmetries: Vec<Asymmetry>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticProbeSpec {
    fn default() -> Self {
        Self {
            samples: 5000,
            image_size: 16,
            classes: 4,
            cycles: 2,
            base: 0.25,
            amplitude: 0.05,
            noise_std: 0.005,
            nuisances: vec![Nuisance::Brightness { min: 0.5, max: 2.0 }],
            asymmetries: vec![Asymmetry::VerticalGradient { strength: 0.4 }],
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

const CHANNEL_GAIN: [f64; 3] = [1.0, 0.95, 0.9];

impl SyntheticProbeSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for n in &self.nuisances {
            if self.asymmetries.iter().any(|a| a.affects() == n.affects()) {
                problems.push(format!(
                    "`{}` is both a nuisance and an asymmetry target",
                    n.affects()
                ));
            }
            if let Nuisance::Brightness { min, max } = n {
                if !(*min > 0.0 && min <= max && max.is_finite()) {
                    problems.push(format!("brightness range [{min}, {max}] must satisfy 0 < min <= max"));
                }
            }
        }
        if self.classes != 2 && self.classes != 4 {
            problems.push(format!("classes must be 2 or 4, got {}", self.classes));
        }
        if self.cycles == 0 || !self.cycles.is_multiple_of(2) {
            problems.push(format!("cycles must be even and positive, got {}", self.cycles));
        }
        if self.image_size < 8 || !self.image_size.is_multiple_of(2) {
            problems.push(format!("image_size must be even and at least 8, got {}", self.image_size));
        }
        if self.samples < 10 * self.classes {
            problems.push(format!("need at least {} samples", 10 * self.classes));
        }
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            problems.push("test_fraction must lie in (0, 1)".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    fn wave_vector(&self, class: usize) -> (f64, f64) {
        let f = self.cycles as f64;
        match class {
            0 => (f, 0.0),
            1 => (0.0, f),
            2 => (f, f),
            _ => (f, -f),
        }
    }

    /// Renders one image of `class`.
    pub fn render(&self, class: usize, r: &mut rng::RngState) -> Image {
        let s = self.image_size;
        let (fx, fy) = self.wave_vector(class);
        let phase = r.random::<f64>() * 2.0 * PI;
        let mut gain = 1.0;
        let mut mirror = false;
        for n in &self.nuisances {
            match *n {
                Nuisance::Brightness { min, max } => {
                    gain = (min.ln() + r.random::<f64>() * (max.ln() - min.ln())).exp();
                }
                Nuisance::HorizontalMirror => mirror = r.random::<bool>(),
            }
        }
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite std");
        let ramp = |t: usize| 0.5 - t as f64 / (s - 1) as f64;
        let mut data = vec![0.0f32; s * s * 3];
        for y in 0..s {
            for x in 0..s {
                let arg = 2.0 * PI * (fx * x as f64 + fy * y as f64) / s as f64 + phase;
                let mut v = self.base + self.amplitude * arg.cos();
                for a in &self.asymmetries {
                    v += match *a {
                        Asymmetry::VerticalGradient { strength } => strength * ramp(y),
                        Asymmetry::HorizontalGradient { strength } => strength * ramp(x),
                    };
                }
                let xx = if mirror { s - 1 - x } else { x };
                for (c, g) in CHANNEL_GAIN.iter().enumerate() {
                    let n = if self.noise_std > 0.0 { noise.sample(r) } else { 0.0 };
                    data[(y * s + xx) * 3 + c] = (gain * g * v + n) as f32;
                }
            }
        }
        Image::from_fn(s, s, 3, |y, x, c| data[(y * s + x) * 3 + c]).expect("valid probe shape")
    }
}

fn balanced_labels(n: usize, classes: usize, r: &mut rng::RngState) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(r);
    labels
}

/// Generates the classification probe. Fully determined by `spec`.
pub fn make_synthetic_probe(spec: &SyntheticProbeSpec) -> Result<DatasetHandle> {
    spec.validate()?;
    let n_test = ((spec.samples as f64) * spec.test_fraction).round() as usize;
    let n_train = spec.samples - n_test;
    let split = |n: usize, stream: &str| -> Result<Split> {
        let mut r = rng::derive(spec.seed, &[rng::tag("probe"), rng::tag(stream)]);
        let labels = balanced_labels(n, spec.classes, &mut r);
        let images = labels.iter().map(|&l| spec.render(l, &mut r)).collect();
        Split::new(images, Targets::Classes(labels))
    };
    let train = split(n_train, "train")?;
    let test = split(n_test, "test")?;
    let mut h = DatasetHandle::assemble("probe", TaskKind::Classification, spec.classes, train, test, 0.1, spec.seed)?;
    h.notes.push(format!(
        "synthetic probe: nuisances {:?}, asymmetries {:?}",
        spec.nuisances.iter().map(Nuisance::affects).collect::<Vec<_>>(),
        spec.asymmetries.iter().map(Asymmetry::affects).collect::<Vec<_>>()
    ));
    Ok(h)
}

/// Three-class segmentation probe: background, squares and discs on a
/// textured background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegProbeSpec {
    pub samples: usize,
    pub image_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SegProbeSpec {
    fn default() -> Self {
        Self {
            samples: 600,
            image_size: 16,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

fn render_seg(size: usize, r: &mut rng::RngState) -> (Image, Mask) {
    let s = size as f64;
    let mut mask = vec![0u8; size * size];
    let side = r.random_range(size / 4..=size / 2).max(2);
    let (sy, sx) = (r.random_range(0..=size - side), r.random_range(0..=size - side));
    for y in sy..sy + side {
        for x in sx..sx + side {
            mask[y * size + x] = 1;
        }
    }
    let radius = r.random_range(s / 8.0..=s / 4.0).max(1.5);
    let (cy, cx) = (r.random_range(radius..s - radius), r.random_range(radius..s - radius));
    for y in 0..size {
        for x in 0..size {
            let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
            if dy * dy + dx * dx <= radius * radius {
                mask[y * size + x] = 2;
            }
        }
    }
    let (ph1, ph2) = (r.random::<f64>() * 2.0 * PI, r.random::<f64>() * 2.0 * PI);
    let mut jitter = vec![0.0f64; size * size * 3];
    for v in jitter.iter_mut() {
        *v = r.random_range(-0.04..0.04);
    }
    let img = Image::from_fn(size, size, 3, |y, x, c| {
        let texture = 0.35 + 0.1 * (2.0 * PI * 3.0 * x as f64 / s + ph1).sin() * (2.0 * PI * 2.0 * y as f64 / s + ph2).cos();
        let colour = match mask[y * size + x] {
            0 => [texture, texture, texture],
            1 => [0.85, 0.3, 0.25],
            _ => [0.2, 0.35, 0.9],
        };
        (colour[c] + jitter[(y * size + x) * 3 + c]) as f32
    })
    .expect("valid probe shape");
    (img, Mask::new(size, size, mask).expect("valid mask"))
}

pub fn make_segmentation_probe(spec: &SegProbeSpec) -> Result<DatasetHandle> {
    if spec.image_size < 8 || spec.samples < 10 || !(0.0 < spec.test_fraction && spec.test_fraction < 1.0) {
        return Err(Error::InvalidConfig(vec![format!(
            "segmentation probe needs image_size >= 8, samples >= 10 and test_fraction in (0, 1); got {spec:?}"
        )]));
    }
    let n_test = ((spec.samples as f64) * spec.test_fraction).round() as usize;
    let split = |n: usize, stream: &str| -> Result<Split> {
        let mut r = rng::derive(spec.seed, &[rng::tag("seg-probe"), rng::tag(stream)]);
        let (images, masks): (Vec<_>, Vec<_>) = (0..n).map(|_| render_seg(spec.image_size, &mut r)).unzip();
        Split::new(images, Targets::Masks(masks))
    };
    let train = split(spec.samples - n_test, "train")?;
    let test = split(n_test, "test")?;
    DatasetHandle::assemble("seg-probe", TaskKind::Segmentation, 3, train, test, 0.1, spec.seed)
}

#[derive(Serialize, Deserialize)]
struct ProbeMeta {
    name: String,
    task: TaskKind,
    classes: usize,
    notes: Vec<String>,
}

const SPLITS: [&str; 3] = ["train", "val", "test"];

/// Writes a dataset as PNG files plus `labels.csv`, `meta.json` and a
/// checksum manifest. Pixel values are quantized to 8 bits.
pub fn save_probe_dir(handle: &DatasetHandle, dir: &Path) -> Result<()> {
    let mut files = Vec::new();
    let mut csv = String::from("split,file,label\n");
    for (name, split) in SPLITS.iter().zip([&handle.train, &handle.val, &handle.test]) {
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for (i, img) in split.images.iter().enumerate() {
            let rel = PathBuf::from(name).join(format!("{i:05}.png"));
            write_png(&dir.join(&rel), img)?;
            let label = match &split.targets {
                Targets::Classes(l) => l[i].to_string(),
                Targets::Masks(m) => {
                    let mrel = PathBuf::from(name).join(format!("{i:05}_mask.png"));
                    let mm = &m[i];
                    let buf = image::GrayImage::from_raw(mm.width() as u32, mm.height() as u32, mm.data().to_vec())
                        .expect("mask buffer size");
                    buf.save(dir.join(&mrel))?;
                    files.push(mrel.clone());
                    mrel.to_string_lossy().into_owned()
                }
            };
            csv.push_str(&format!("{name},{},{label}\n", rel.display()));
            files.push(rel);
        }
    }
    let write = |name: &str, text: String| -> Result<PathBuf> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(PathBuf::from(name))
    };
    files.push(write("labels.csv", csv)?);
    let meta = ProbeMeta {
        name: handle.name.clone(),
        task: handle.task,
        classes: handle.classes,
        notes: handle.notes.clone(),
    };
    files.push(write("meta.json", serde_json::to_string_pretty(&meta)?)?);
    write_manifest(dir, &files)?;
    Ok(())
}

fn write_png(path: &Path, img: &Image) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes = img.to_u8();
    if img.channels() == 3 {
        image::RgbImage::from_raw(w, h, bytes).expect("rgb buffer size").save(path)?;
    } else {
        image::GrayImage::from_raw(w, h, bytes).expect("gray buffer size").save(path)?;
    }
    Ok(())
}

fn read_png(path: &Path, channels: usize) -> Result<Image> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if channels == 3 {
        Image::from_u8(h, w, 3, img.to_rgb8().as_raw())
    } else {
        Image::from_u8(h, w, 1, img.to_luma8().as_raw())
    }
}

/// Reads a directory written by [`save_probe_dir`], verifying its checksums.
pub fn load_probe_dir(dir: &Path) -> Result<DatasetHandle> {
    if !verify_manifest(dir)? {
        return Err(Error::MissingDataset {
            name: "probe directory".into(),
            root: dir.to_path_buf(),
        });
    }
    let meta_path = dir.join("meta.json");
    let meta: ProbeMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?)?;
    let csv_path = dir.join("labels.csv");
    let csv = std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut parts: [(Vec<Image>, Vec<usize>, Vec<Mask>); 3] = Default::default();
    for (no, line) in csv.lines().enumerate().skip(1) {
        let corrupt = |reason: &str| Error::CorruptData {
            path: csv_path.clone(),
            reason: format!("line {}: {reason}", no + 1),
        };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(corrupt("expected 3 columns"));
        }
        let slot = SPLITS.iter().position(|s| *s == cols[0]).ok_or_else(|| corrupt("unknown split"))?;
        let img = read_png(&dir.join(cols[1]), 3)?;
        match meta.task {
            TaskKind::Classification => {
                let l: usize = cols[2].parse().map_err(|_| corrupt("label is not an integer"))?;
                if l >= meta.classes {
                    return Err(corrupt("label out of range"));
                }
                parts[slot].1.push(l);
            }
            TaskKind::Segmentation => {
                let m = image::open(dir.join(cols[2]))?.to_luma8();
                parts[slot].2.push(Mask::new(m.height() as usize, m.width() as usize, m.into_raw())?);
            }
        }
        parts[slot].0.push(img);
    }
    let mut splits = parts.into_iter().map(|(images, labels, masks)| {
        let targets = match meta.task {
            TaskKind::Classification => Targets::Classes(labels),
            TaskKind::Segmentation => Targets::Masks(masks),
        };
        Split::new(images, targets)
    });
    let train = splits.next().expect("three splits")?;
    let val = splits.next().expect("three splits")?;
    let test = splits.next().expect("three splits")?;
    let mut h = DatasetHandle::assemble(&meta.name, meta.task, meta.classes, train, test, 0.0, 0)?;
    h.val = val;
    h.notes = meta.notes;
    Ok(h)
}
