//! Datasets, normalization, synthetic probes and persistence.

mod checkpoint;
mod checksum;
mod cifar;
mod cityscapes;
mod mat5;
mod probe;
mod registry;
mod svhn;
mod tiny_imagenet;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::{TaskKind, Tensor};
use crate::rng;
use crate::transform::{resize_image, resize_mask, Image, Mask, Shape};
use crate::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use checksum::{sha256_file, verify_manifest, write_manifest, ChecksumManifest, MANIFEST_FILE};
pub use cifar::{write_cifar10_batch, CIFAR_RECORD_LEN};
pub use cityscapes::{label_id_to_train_id, CITYSCAPES_CLASSES};
pub use probe::{
    load_probe_dir, make_segmentation_probe, make_synthetic_probe, save_probe_dir, Asymmetry, Nuisance,
    SegProbeSpec, SyntheticProbeSpec,
};
pub use registry::{RunRegistry, RunPaths};

/// Environment variable naming the default data root.
pub const DATA_ROOT_ENV: &str = "SAFEAUG_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes(Vec<usize>),
    Masks(Vec<Mask>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(v) => v.len(),
            Targets::Masks(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Self {
        match self {
            Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
            Targets::Masks(v) => Targets::Masks(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub images: Vec<Image>,
    pub targets: Targets,
}

impl Split {
    pub fn new(images: Vec<Image>, targets: Targets) -> Result<Self> {
        if images.len() != targets.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} images vs {} targets",
                images.len(),
                targets.len()
            )));
        }
        Ok(Self { images, targets })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            targets: self.targets.select(idx),
        }
    }

    pub fn classes(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes(v) => Some(v),
            Targets::Masks(_) => None,
        }
    }

    pub fn masks(&self) -> Option<&[Mask]> {
        match &self.targets {
            Targets::Masks(v) => Some(v),
            Targets::Classes(_) => None,
        }
    }
}

/// Per-channel mean and standard deviation on the `[0, 1]` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn compute(images: &[Image]) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::EmptyDataset("no images for statistics".into()))?;
        let c = first.channels();
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        let mut count = 0usize;
        for img in images {
            if img.channels() != c {
                return Err(Error::ShapeMismatch("mixed channel counts".into()));
            }
            for px in img.data().chunks_exact(c) {
                for (ch, &v) in px.iter().enumerate() {
                    let v = f64::from(v);
                    sum[ch] += v;
                    sq[ch] += v * v;
                }
            }
            count += img.height() * img.width();
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(1e-6))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Channel means as fill values, i.e. zero after normalization.
    pub fn fill(&self) -> Vec<f32> {
        self.mean.iter().map(|&m| m as f32).collect()
    }

    /// Normalized CHW values of `img`.
    pub fn normalize(&self, img: &Image) -> Vec<f64> {
        let (h, w, c) = (img.height(), img.width(), img.channels());
        let mut out = vec![0.0; c * h * w];
        for (p, px) in img.data().chunks_exact(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                out[ch * h * w + p] = (f64::from(v) - self.mean[ch]) / self.std[ch];
            }
        }
        out
    }

    /// Inverse of [`NormStats::normalize`], back to HWC `[0, 1]` values.
    pub fn denormalize(&self, chw: &[f64], h: usize, w: usize) -> Vec<f64> {
        let c = self.mean.len();
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            for p in 0..h * w {
                out[p * c + ch] = chw[ch * h * w + p] * self.std[ch] + self.mean[ch];
            }
        }
        out
    }
}

/// Resizes to `input` (bilinear) when needed and normalizes into a batch tensor.
pub fn to_tensor(images: &[Image], stats: &NormStats, input: Shape) -> Result<Tensor> {
    let sample = input.channels * input.height * input.width;
    let mut data = Vec::with_capacity(images.len() * sample);
    for img in images {
        if img.channels() != input.channels {
            return Err(Error::ShapeMismatch(format!(
                "image has {} channels, model expects {}",
                img.channels(),
                input.channels
            )));
        }
        if img.height() != input.height || img.width() != input.width {
            data.extend(stats.normalize(&resize_image(img, input.height, input.width)));
        } else {
            data.extend(stats.normalize(img));
        }
    }
    Tensor::from_vec(images.len(), input.channels, input.height, input.width, data)
}

/// Nearest-neighbour resize of masks to the model resolution.
pub fn masks_to_input(masks: &[Mask], input: Shape) -> Vec<Mask> {
    masks
        .iter()
        .map(|m| {
            if m.height() == input.height && m.width() == input.width {
                m.clone()
            } else {
                resize_mask(m, input.height, input.width)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHandle {
    pub name: String,
    pub task: TaskKind,
    pub classes: usize,
    pub input: Shape,
    pub train: Split,
    pub val: Split,
    pub test: Split,
    /// Computed on `train` only.
    pub stats: NormStats,
    /// Adjustments made while loading, e.g. capped crop sizes.
    pub notes: Vec<String>,
}

impl DatasetHandle {
    /// Builds a handle, carving a stratified validation split of
    /// `val_fraction` out of `train`.
    pub fn assemble(
        name: &str,
        task: TaskKind,
        classes: usize,
        train: Split,
        test: Split,
        val_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset(format!("{name}: empty train split")));
        }
        if test.is_empty() {
            return Err(Error::EmptyDataset(format!("{name}: empty test split")));
        }
        let input = train.images[0].shape();
        let n_val = ((train.len() as f64) * val_fraction).round() as usize;
        let (train, val) = if n_val == 0 {
            let val = train.select(&[]);
            (train, val)
        } else {
            let val_idx = match &train.targets {
                Targets::Classes(labels) => stratified_indices(labels, classes, n_val, rng::derive(seed, &[rng::tag("val")]))?,
                Targets::Masks(_) => {
                    let mut idx: Vec<usize> = (0..train.len()).collect();
                    idx.shuffle(&mut rng::derive(seed, &[rng::tag("val")]));
                    idx.truncate(n_val);
                    idx.sort_unstable();
                    idx
                }
            };
            let mut is_val = vec![false; train.len()];
            for &i in &val_idx {
                is_val[i] = true;
            }
            let rest: Vec<usize> = (0..train.len()).filter(|&i| !is_val[i]).collect();
            (train.select(&rest), train.select(&val_idx))
        };
        let stats = NormStats::compute(&train.images)?;
        Ok(Self {
            name: name.to_string(),
            task,
            classes,
            input,
            train,
            val,
            test,
            stats,
            notes: Vec::new(),
        })
    }
}

/// `count` indices drawn so every class gets `count/K` items, with the
/// remainder spread over randomly chosen classes; returned sorted.
pub fn stratified_indices(labels: &[usize], classes: usize, count: usize, mut r: rng::RngState) -> Result<Vec<usize>> {
    if count > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "subset of {count} requested from {} items",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    for v in by_class.values_mut() {
        v.shuffle(&mut r);
    }
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(&mut r);
    let base = count / classes;
    let mut quota = vec![base; classes];
    for &c in order.iter().take(count % classes) {
        quota[c] += 1;
    }
    // Classes without enough items hand their shortfall to the others.
    let mut shortfall = 0;
    for c in 0..classes {
        let have = by_class.get(&c).map_or(0, Vec::len);
        if quota[c] > have {
            shortfall += quota[c] - have;
            quota[c] = have;
        }
    }
    while shortfall > 0 {
        let mut moved = false;
        for &c in &order {
            let have = by_class.get(&c).map_or(0, Vec::len);
            if shortfall > 0 && quota[c] < have {
                quota[c] += 1;
                shortfall -= 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let mut idx: Vec<usize> = (0..classes)
        .flat_map(|c| by_class.get(&c).map_or(&[][..], |v| &v[..quota[c]]).to_vec())
        .collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Known dataset names.
pub const DATASETS: [&str; 7] = ["probe", "seg-probe", "cifar10", "cifar100", "svhn", "tiny-imagenet", "cityscapes"];

/// Where a dataset should be read from.
#[derive(Debug, Clone)]
pub struct DataRequest {
    pub name: String,
    pub root: Option<PathBuf>,
    pub subset_size: Option<usize>,
    pub seed: u64,
    /// Resolution used for the synthetic datasets.
    pub probe_size: usize,
    /// Sample count used for the synthetic datasets.
    pub probe_samples: usize,
}

impl DataRequest {
    pub fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            root: None,
            subset_size: None,
            seed,
            probe_size: 16,
            probe_samples: 5000,
        }
    }

    pub fn root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = Some(root.into());
        self
    }

    pub fn subset(mut self, n: usize) -> Self {
        self.subset_size = Some(n);
        self
    }
}

fn resolve_root(root: Option<&Path>) -> PathBuf {
    root.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Loads a dataset by name. Archive datasets are read from `root` (or
/// `$SAFEAUG_DATA_ROOT`); `probe` and `seg-probe` are generated. With a
/// subset size, the train split is a stratified subset drawn under `seed`.
pub fn load_dataset(req: &DataRequest) -> Result<DatasetHandle> {
    let root = resolve_root(req.root.as_deref());
    let seed = req.seed;
    let mut handle = match req.name.as_str() {
        "probe" => {
            let spec = SyntheticProbeSpec {
                samples: req.probe_samples,
                image_size: req.probe_size,
                seed,
                ..SyntheticProbeSpec::default()
            };
            make_synthetic_probe(&spec)?
        }
        "seg-probe" => make_segmentation_probe(&SegProbeSpec {
            samples: req.probe_samples.min(2000),
            image_size: req.probe_size,
            seed,
            ..SegProbeSpec::default()
        })?,
        "cifar10" => cifar::load_cifar10(&root, req.subset_size, seed)?,
        "cifar100" => cifar::load_cifar100(&root, req.subset_size, seed)?,
        "svhn" => svhn::load_svhn(&root, req.subset_size, seed)?,
        "tiny-imagenet" => tiny_imagenet::load(&root, req.subset_size, seed)?,
        "cityscapes" => cityscapes::load(&root, req.subset_size, seed)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown dataset `{other}` (known: {})",
                DATASETS.join(", ")
            )))
        }
    };
    if matches!(req.name.as_str(), "probe" | "seg-probe") {
        if let Some(n) = req.subset_size {
            subset_train(&mut handle, n, seed)?;
        }
    }
    Ok(handle)
}

pub(crate) fn subset_train(handle: &mut DatasetHandle, n: usize, seed: u64) -> Result<()> {
    if n >= handle.train.len() {
        return Ok(());
    }
    let idx = match &handle.train.targets {
        Targets::Classes(l) => stratified_indices(l, handle.classes, n, rng::derive(seed, &[rng::tag("subset")]))?,
        Targets::Masks(_) => (0..n).collect(),
    };
    handle.train = handle.train.select(&idx);
    handle.stats = NormStats::compute(&handle.train.images)?;
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
