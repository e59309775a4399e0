//! SVHN cropped digits (`train_32x32.mat`, `test_32x32.mat`).

use std::path::Path;

use super::mat5::{read_mat, MatArray, MatData};
use super::{subset_train, verify_manifest, DatasetHandle, Split, Targets};
use crate::model::TaskKind;
use crate::transform::Image;
use crate::{Error, Result};

fn to_split(path: &Path, arrays: Vec<MatArray>) -> Result<Split> {
    let corrupt = |reason: String| Error::CorruptData {
        path: path.to_path_buf(),
        reason,
    };
    let x = arrays.iter().find(|a| a.name == "X").ok_or_else(|| corrupt("missing `X`".into()))?;
    let y = arrays.iter().find(|a| a.name == "y").ok_or_else(|| corrupt("missing `y`".into()))?;
    if x.dims.len() != 4 || x.dims[2] != 3 {
        return Err(corrupt(format!("`X` has dims {:?}, expected (h, w, 3, n)", x.dims)));
    }
    let (h, w, n) = (x.dims[0], x.dims[1], x.dims[3]);
    if y.data.len() != n {
        return Err(corrupt(format!("{} labels for {n} images", y.data.len())));
    }
    let mut images = Vec::with_capacity(n);
    let mut hwc = vec![0u8; h * w * 3];
    for i in 0..n {
        // Column-major: X(row, col, channel, item).
        for c in 0..3 {
            for col in 0..w {
                for row in 0..h {
                    let src = row + h * (col + w * (c + 3 * i));
                    hwc[(row * w + col) * 3 + c] = match &x.data {
                        MatData::U8(v) => v[src],
                        MatData::F64(v) => v[src].clamp(0.0, 255.0) as u8,
                    };
                }
            }
        }
        images.push(Image::from_u8(h, w, 3, &hwc)?);
    }
    let labels = (0..n)
        .map(|i| {
            let v = y.data.value(i) as usize;
            // Digit 0 is stored as label 10.
            match v {
                10 => Ok(0),
                1..=9 => Ok(v),
                _ => Err(corrupt(format!("label {v} outside 1..=10"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Split::new(images, Targets::Classes(labels))
}

pub(crate) fn load_svhn(root: &Path, subset: Option<usize>, seed: u64) -> Result<DatasetHandle> {
    let dir = [root.join("svhn"), root.to_path_buf()]
        .into_iter()
        .find(|d| d.join("test_32x32.mat").is_file())
        .ok_or_else(|| Error::MissingDataset {
            name: "svhn".into(),
            root: root.to_path_buf(),
        })?;
    let train_path = dir.join("train_32x32.mat");
    let test_path = dir.join("test_32x32.mat");
    let train = to_split(&train_path, read_mat(&train_path)?)?;
    let test = to_split(&test_path, read_mat(&test_path)?)?;
    let mut h = DatasetHandle::assemble("svhn", TaskKind::Classification, 10, train, test, 0.1, seed)?;
    if !verify_manifest(&dir)? {
        h.notes.push(format!("no checksum manifest in {}", dir.display()));
    }
    if let Some(n) = subset {
        subset_train(&mut h, n, seed)?;
    }
    Ok(h)
}
