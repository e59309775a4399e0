//! Tiny ImageNet (`tiny-imagenet-200`): 200 classes at 64×64. The public
//! validation split stands in for the unlabeled test split.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{stratified_indices, verify_manifest, DatasetHandle, Split, Targets};
use crate::model::TaskKind;
use crate::rng;
use crate::transform::Image;
use crate::{Error, Result};

const SIDE: usize = 64;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn decode(path: &Path) -> Result<Image> {
    let img = image::open(path)?.to_rgb8();
    let img = if img.width() as usize != SIDE || img.height() as usize != SIDE {
        image::imageops::resize(&img, SIDE as u32, SIDE as u32, image::imageops::FilterType::Triangle)
    } else {
        img
    };
    Image::from_u8(SIDE, SIDE, 3, img.as_raw())
}

fn decode_all(files: &[(PathBuf, usize)]) -> Result<Split> {
    let images = files.iter().map(|(p, _)| decode(p)).collect::<Result<Vec<_>>>()?;
    Split::new(images, Targets::Classes(files.iter().map(|(_, l)| *l).collect()))
}

/// Subsetting happens on file lists before decoding, so a small subset never
/// touches the full 100k training images.
pub(crate) fn load(root: &Path, subset: Option<usize>, seed: u64) -> Result<DatasetHandle> {
    let dir = [root.join("tiny-imagenet-200"), root.to_path_buf()]
        .into_iter()
        .find(|d| d.join("wnids.txt").is_file())
        .ok_or_else(|| Error::MissingDataset {
            name: "tiny-imagenet".into(),
            root: root.to_path_buf(),
        })?;
    let wnids: Vec<String> = read_text(&dir.join("wnids.txt"))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    let index: HashMap<&str, usize> = wnids.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let classes = wnids.len();

    let mut train_files = Vec::new();
    for (label, wnid) in wnids.iter().enumerate() {
        let img_dir = dir.join("train").join(wnid).join("images");
        let mut names: Vec<PathBuf> = std::fs::read_dir(&img_dir)
            .map_err(|e| Error::io(&img_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        names.sort();
        train_files.extend(names.into_iter().map(|p| (p, label)));
    }
    if let Some(n) = subset {
        let labels: Vec<usize> = train_files.iter().map(|(_, l)| *l).collect();
        let idx = stratified_indices(&labels, classes, n.min(labels.len()), rng::derive(seed, &[rng::tag("subset")]))?;
        train_files = idx.into_iter().map(|i| train_files[i].clone()).collect();
    }

    let ann_path = dir.join("val").join("val_annotations.txt");
    let mut test_files = Vec::new();
    for (no, line) in read_text(&ann_path)?.lines().enumerate() {
        let mut cols = line.split('\t');
        let (Some(file), Some(wnid)) = (cols.next(), cols.next()) else {
            continue;
        };
        let label = *index.get(wnid).ok_or_else(|| Error::CorruptData {
            path: ann_path.clone(),
            reason: format!("line {}: unknown class `{wnid}`", no + 1),
        })?;
        test_files.push((dir.join("val").join("images").join(file), label));
    }

    let train = decode_all(&train_files)?;
    let test = decode_all(&test_files)?;
    let mut h = DatasetHandle::assemble("tiny-imagenet", TaskKind::Classification, classes, train, test, 0.1, seed)?;
    h.notes.push("labeled validation split used as the test split".into());
    if !verify_manifest(&dir)? {
        h.notes.push(format!("no checksum manifest in {}", dir.display()));
    }
    Ok(h)
}
