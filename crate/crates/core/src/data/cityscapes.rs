//! Cityscapes fine annotations, rescaled to 256×256; the val split is the
//! evaluation split.

use std::path::{Path, PathBuf};

use super::{verify_manifest, DatasetHandle, Split, Targets};
use crate::model::TaskKind;
use crate::transform::{Image, Mask};
use crate::{Error, Result};

pub const CITYSCAPES_CLASSES: usize = 19;
const SIDE: u32 = 256;

/// Maps a Cityscapes `labelIds` value to the 19-class training id, or
/// [`Mask::IGNORE`].
pub fn label_id_to_train_id(id: u8) -> u8 {
    match id {
        7 => 0,
        8 => 1,
        11 => 2,
        12 => 3,
        13 => 4,
        17 => 5,
        19 => 6,
        20 => 7,
        21 => 8,
        22 => 9,
        23 => 10,
        24 => 11,
        25 => 12,
        26 => 13,
        27 => 14,
        28 => 15,
        31 => 16,
        32 => 17,
        33 => 18,
        _ => Mask::IGNORE,
    }
}

fn pairs(root: &Path, split: &str) -> Result<Vec<(PathBuf, PathBuf)>> {
    let img_root = root.join("leftImg8bit").join(split);
    let mut out = Vec::new();
    let mut cities: Vec<PathBuf> = std::fs::read_dir(&img_root)
        .map_err(|e| Error::io(&img_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    cities.sort();
    for city in cities {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&city)
            .map_err(|e| Error::io(&city, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort();
        for f in files {
            let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let Some(stem) = name.strip_suffix("_leftImg8bit.png") else {
                continue;
            };
            let city_name = city.file_name().expect("city dir has a name");
            let gt = root
                .join("gtFine")
                .join(split)
                .join(city_name)
                .join(format!("{stem}_gtFine_labelIds.png"));
            if !gt.is_file() {
                return Err(Error::CorruptData {
                    path: gt,
                    reason: "annotation missing".into(),
                });
            }
            out.push((f, gt));
        }
    }
    Ok(out)
}

fn read_split(files: &[(PathBuf, PathBuf)]) -> Result<Split> {
    use image::imageops::{resize, FilterType};
    let mut images = Vec::with_capacity(files.len());
    let mut masks = Vec::with_capacity(files.len());
    for (img_path, gt_path) in files {
        let img = resize(&image::open(img_path)?.to_rgb8(), SIDE, SIDE, FilterType::Triangle);
        let gt = resize(&image::open(gt_path)?.to_luma8(), SIDE, SIDE, FilterType::Nearest);
        images.push(Image::from_u8(SIDE as usize, SIDE as usize, 3, img.as_raw())?);
        let ids = gt.as_raw().iter().map(|&v| label_id_to_train_id(v)).collect();
        masks.push(Mask::new(SIDE as usize, SIDE as usize, ids)?);
    }
    Split::new(images, Targets::Masks(masks))
}

pub(crate) fn load(root: &Path, subset: Option<usize>, seed: u64) -> Result<DatasetHandle> {
    let dir = [root.join("cityscapes"), root.to_path_buf()]
        .into_iter()
        .find(|d| d.join("leftImg8bit").is_dir() && d.join("gtFine").is_dir())
        .ok_or_else(|| Error::MissingDataset {
            name: "cityscapes".into(),
            root: root.to_path_buf(),
        })?;
    let mut train_files = pairs(&dir, "train")?;
    if let Some(n) = subset {
        train_files.truncate(n);
    }
    let train = read_split(&train_files)?;
    let test = read_split(&pairs(&dir, "val")?)?;
    let mut h = DatasetHandle::assemble("cityscapes", TaskKind::Segmentation, CITYSCAPES_CLASSES, train, test, 0.1, seed)?;
    h.notes.push("images rescaled to 256x256; crops are capped at the image size".into());
    if !verify_manifest(&dir)? {
        h.notes.push(format!("no checksum manifest in {}", dir.display()));
    }
    Ok(h)
}
