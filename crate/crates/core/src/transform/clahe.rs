//! Contrast-limited adaptive histogram equalization on the luma channel.

use super::image::Image;
use super::photometric::luma;

const BINS: usize = 256;

/// Equalizes 8-bit luma over a `grid×grid` tiling with bilinear blending of
/// the tile lookup tables. Colour images have every channel shifted by the
/// luma change, which keeps chroma differences intact.
pub(crate) fn clahe(img: &Image, clip_limit: f64, grid: usize) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let y_in = luma(img);
    let levels: Vec<usize> = y_in.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as usize).collect();

    let gy = grid.min(h).max(1);
    let gx = grid.min(w).max(1);
    let tile_h = h.div_ceil(gy);
    let tile_w = w.div_ceil(gx);
    let gy = h.div_ceil(tile_h);
    let gx = w.div_ceil(tile_w);

    let mut luts = vec![[0.0f64; BINS]; gy * gx];
    for ty in 0..gy {
        for tx in 0..gx {
            let (y0, y1) = (ty * tile_h, ((ty + 1) * tile_h).min(h));
            let (x0, x1) = (tx * tile_w, ((tx + 1) * tile_w).min(w));
            let mut hist = [0usize; BINS];
            for y in y0..y1 {
                for x in x0..x1 {
                    hist[levels[y * w + x]] += 1;
                }
            }
            let n = (y1 - y0) * (x1 - x0);
            luts[ty * gx + tx] = tile_lut(&mut hist, n, clip_limit);
        }
    }

    let centre = |t: usize, size: usize, extent: usize| -> f64 {
        let start = t * size;
        let end = ((t + 1) * size).min(extent);
        (start + end) as f64 / 2.0 - 0.5
    };
    let neighbours = |pos: f64, size: usize, count: usize, extent: usize| -> (usize, usize, f64) {
        let mut t0 = 0;
        while t0 + 1 < count && centre(t0 + 1, size, extent) <= pos {
            t0 += 1;
        }
        if t0 + 1 >= count || pos <= centre(0, size, extent) {
            let t = if pos <= centre(0, size, extent) { 0 } else { t0 };
            return (t, t, 0.0);
        }
        let c0 = centre(t0, size, extent);
        let c1 = centre(t0 + 1, size, extent);
        (t0, t0 + 1, (pos - c0) / (c1 - c0))
    };

    let mut out = Vec::with_capacity(h * w * c);
    let src = img.data();
    for y in 0..h {
        let (ty0, ty1, wy) = neighbours(y as f64, tile_h, gy, h);
        for x in 0..w {
            let (tx0, tx1, wx) = neighbours(x as f64, tile_w, gx, w);
            let l = levels[y * w + x];
            let v00 = luts[ty0 * gx + tx0][l];
            let v01 = luts[ty0 * gx + tx1][l];
            let v10 = luts[ty1 * gx + tx0][l];
            let v11 = luts[ty1 * gx + tx1][l];
            let top = v00 + (v01 - v00) * wx;
            let bot = v10 + (v11 - v10) * wx;
            let new_y = (top + (bot - top) * wy) / 255.0;
            let shift = new_y - y_in[y * w + x];
            for ch in 0..c {
                out.push((f64::from(src[(y * w + x) * c + ch]) + shift) as f32);
            }
        }
    }
    Image::from_raw(h, w, c, out)
}

fn tile_lut(hist: &mut [usize; BINS], n: usize, clip_limit: f64) -> [f64; BINS] {
    let limit = ((clip_limit * n as f64 / BINS as f64) as usize).max(1);
    let mut excess = 0usize;
    for b in hist.iter_mut() {
        if *b > limit {
            excess += *b - limit;
            *b = limit;
        }
    }
    let add = excess / BINS;
    let mut rest = excess % BINS;
    for b in hist.iter_mut() {
        *b += add;
        if rest > 0 {
            *b += 1;
            rest -= 1;
        }
    }
    let mut lut = [0.0f64; BINS];
    let mut cdf = 0usize;
    for (i, b) in hist.iter().enumerate() {
        cdf += b;
        lut[i] = (cdf as f64 * 255.0 / n as f64).round();
    }
    lut
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_shape_and_range() {
        let img = Image::from_fn(9, 13, 3, |y, x, c| ((y * 13 + x) % 17) as f32 / 40.0 + c as f32 * 0.1).unwrap();
        let out = clahe(&img, 4.0, 8);
        assert_eq!(out.shape(), img.shape());
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn stretches_a_low_contrast_gray_ramp() {
        let img = Image::from_fn(16, 16, 1, |y, x, _| 0.4 + 0.1 * ((y * 16 + x) as f32 / 255.0)).unwrap();
        let out = clahe(&img, 40.0, 1);
        let spread = |i: &Image| {
            let lo = i.data().iter().cloned().fold(f32::MAX, f32::min);
            let hi = i.data().iter().cloned().fold(f32::MIN, f32::max);
            hi - lo
        };
        assert!(spread(&out) > 5.0 * spread(&img));
    }
}
