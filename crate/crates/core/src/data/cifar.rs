//! CIFAR-10/100 binary archives (`cifar-10-batches-bin`, `cifar-100-binary`).

use std::path::{Path, PathBuf};

use super::{read_file, subset_train, verify_manifest, DatasetHandle, Split, Targets};
use crate::model::TaskKind;
use crate::transform::Image;
use crate::{Error, Result};

const SIDE: usize = 32;
const PIXELS: usize = SIDE * SIDE * 3;
/// Bytes per CIFAR-10 record: one label byte plus planar RGB.
pub const CIFAR_RECORD_LEN: usize = 1 + PIXELS;
const VAL_FRACTION: f64 = 0.1;

fn planar_to_image(bytes: &[u8]) -> Result<Image> {
    let mut hwc = vec![0u8; PIXELS];
    for c in 0..3 {
        for p in 0..SIDE * SIDE {
            hwc[p * 3 + c] = bytes[c * SIDE * SIDE + p];
        }
    }
    Image::from_u8(SIDE, SIDE, 3, &hwc)
}

/// Parses a binary batch whose records carry `label_bytes` leading label
/// bytes; the last one is used.
fn parse_batch(path: &Path, label_bytes: usize, classes: usize) -> Result<(Vec<Image>, Vec<usize>)> {
    let bytes = read_file(path)?;
    let rec = label_bytes + PIXELS;
    if bytes.is_empty() || bytes.len() % rec != 0 {
        return Err(Error::CorruptData {
            path: path.to_path_buf(),
            reason: format!("size {} is not a multiple of the {rec}-byte record", bytes.len()),
        });
    }
    let mut images = Vec::with_capacity(bytes.len() / rec);
    let mut labels = Vec::with_capacity(bytes.len() / rec);
    for r in bytes.chunks_exact(rec) {
        let label = usize::from(r[label_bytes - 1]);
        if label >= classes {
            return Err(Error::CorruptData {
                path: path.to_path_buf(),
                reason: format!("label {label} out of range for {classes} classes"),
            });
        }
        labels.push(label);
        images.push(planar_to_image(&r[label_bytes..])?);
    }
    Ok((images, labels))
}

fn read_split(dir: &Path, files: &[&str], label_bytes: usize, classes: usize) -> Result<Split> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for f in files {
        let (i, l) = parse_batch(&dir.join(f), label_bytes, classes)?;
        images.extend(i);
        labels.extend(l);
    }
    Split::new(images, Targets::Classes(labels))
}

fn find_dir(root: &Path, name: &str, candidates: &[&str], probe_file: &str) -> Result<PathBuf> {
    candidates
        .iter()
        .map(|c| root.join(c))
        .find(|d| d.join(probe_file).is_file())
        .ok_or_else(|| Error::MissingDataset {
            name: name.into(),
            root: root.to_path_buf(),
        })
}

fn finish(
    name: &str,
    classes: usize,
    dir: &Path,
    train: Split,
    test: Split,
    subset: Option<usize>,
    seed: u64,
) -> Result<DatasetHandle> {
    let mut h = DatasetHandle::assemble(name, TaskKind::Classification, classes, train, test, VAL_FRACTION, seed)?;
    if !verify_manifest(dir)? {
        h.notes.push(format!("no checksum manifest in {}", dir.display()));
    }
    if let Some(n) = subset {
        subset_train(&mut h, n, seed)?;
    }
    Ok(h)
}

pub(crate) fn load_cifar10(root: &Path, subset: Option<usize>, seed: u64) -> Result<DatasetHandle> {
    let dir = find_dir(root, "cifar10", &["cifar-10-batches-bin", "cifar10", "."], "test_batch.bin")?;
    let train_files: Vec<String> = (1..=5).map(|i| format!("data_batch_{i}.bin")).collect();
    let train_refs: Vec<&str> = train_files.iter().map(String::as_str).collect();
    let train = read_split(&dir, &train_refs, 1, 10)?;
    let test = read_split(&dir, &["test_batch.bin"], 1, 10)?;
    finish("cifar10", 10, &dir, train, test, subset, seed)
}

pub(crate) fn load_cifar100(root: &Path, subset: Option<usize>, seed: u64) -> Result<DatasetHandle> {
    let dir = find_dir(root, "cifar100", &["cifar-100-binary", "cifar100", "."], "test.bin")?;
    // Records carry (coarse, fine); fine labels are the 100-way target.
    let train = read_split(&dir, &["train.bin"], 2, 100)?;
    let test = read_split(&dir, &["test.bin"], 2, 100)?;
    finish("cifar100", 100, &dir, train, test, subset, seed)
}

/// Writes images and labels as a CIFAR-10 binary batch.
pub fn write_cifar10_batch(path: &Path, images: &[Image], labels: &[usize]) -> Result<()> {
    if images.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} images vs {} labels", images.len(), labels.len())));
    }
    let mut out = Vec::with_capacity(images.len() * CIFAR_RECORD_LEN);
    for (img, &l) in images.iter().zip(labels) {
        if img.shape() != crate::transform::Shape::new(SIDE, SIDE, 3) || l > 255 {
            return Err(Error::InvalidArgument(format!("CIFAR records are 32x32x3 with byte labels, got {}", img.shape())));
        }
        out.push(l as u8);
        let hwc = img.to_u8();
        for c in 0..3 {
            out.extend((0..SIDE * SIDE).map(|p| hwc[p * 3 + c]));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(32, 32, 3, |y, x, c| ((y + 2 * x + 50 * c) % 256) as f32 / 255.0).unwrap();
        let p = dir.path().join("b.bin");
        write_cifar10_batch(&p, &[img.clone(), img.clone()], &[3, 7]).unwrap();
        let (imgs, labels) = parse_batch(&p, 1, 10).unwrap();
        assert_eq!(labels, vec![3, 7]);
        assert_eq!(imgs[0].to_u8(), img.to_u8());
    }

    #[test]
    fn truncated_batch_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.bin");
        std::fs::write(&p, vec![0u8; CIFAR_RECORD_LEN + 5]).unwrap();
        assert!(matches!(parse_batch(&p, 1, 10), Err(Error::CorruptData { .. })));
    }

    #[test]
    fn missing_root_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_cifar10(dir.path(), None, 0), Err(Error::MissingDataset { .. })));
    }
}
