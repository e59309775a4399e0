use rand::Rng;

use super::image::Image;
use crate::rng::RngState;
use crate::{Error, Result};

/// Occludes one `size×size` square with `fill` (one value per channel).
///
/// Workflows pass the dataset's per-channel mean, which becomes zero after
/// normalization. The square lies fully inside the image along any side that
/// is at least `size` long; along a shorter side it overhangs and covers the
/// whole extent, so `size ≥ max(H, W)` fills the image.
pub fn apply_cutout(image: &Image, size: usize, fill: &[f32], rng: &mut RngState) -> Result<Image> {
    if size == 0 {
        return Err(Error::InvalidArgument("cutout size must be positive".into()));
    }
    let (h, w, c) = (image.height(), image.width(), image.channels());
    if fill.len() != c {
        return Err(Error::ShapeMismatch(format!(
            "cutout fill has {} values for {c} channels",
            fill.len()
        )));
    }
    let (y0, y1) = span(h, size, rng);
    let (x0, x1) = span(w, size, rng);
    let mut data = image.data().to_vec();
    for y in y0..y1 {
        for x in x0..x1 {
            let base = (y * w + x) * c;
            data[base..base + c].copy_from_slice(fill);
        }
    }
    Ok(Image::from_raw(h, w, c, data))
}

fn span(extent: usize, size: usize, rng: &mut RngState) -> (usize, usize) {
    if size >= extent {
        (0, extent)
    } else {
        let start = rng.random_range(0..=extent - size);
        (start, start + size)
    }
}
