//! Pixel-value transforms. All preserve the image shape.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::geometry::reflect101;
use super::image::Image;
use crate::rng::RngState;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

pub(crate) fn luma(img: &Image) -> Vec<f64> {
    let c = img.channels();
    img.data()
        .chunks_exact(c)
        .map(|px| {
            if c == 1 {
                f64::from(px[0])
            } else {
                LUMA[0] * f64::from(px[0]) + LUMA[1] * f64::from(px[1]) + LUMA[2] * f64::from(px[2])
            }
        })
        .collect()
}

pub(crate) fn to_gray(img: &Image) -> Image {
    let c = img.channels();
    let data = luma(img)
        .into_iter()
        .flat_map(|y| std::iter::repeat_n(y as f32, c))
        .collect();
    Image::from_raw(img.height(), img.width(), c, data)
}

fn map(img: &Image, f: impl Fn(f64) -> f64) -> Image {
    let data = img.data().iter().map(|&v| f(f64::from(v)) as f32).collect();
    Image::from_raw(img.height(), img.width(), img.channels(), data)
}

pub(crate) fn contrast(img: &Image, alpha: f64) -> Image {
    let gray = luma(img);
    let mean = gray.iter().sum::<f64>() / gray.len() as f64;
    map(img, |v| alpha * v + (1.0 - alpha) * mean)
}

pub(crate) fn brightness(img: &Image, alpha: f64) -> Image {
    map(img, |v| alpha * v)
}

pub(crate) fn gamma(img: &Image, gamma: f64) -> Image {
    if gamma == 1.0 {
        return img.clone();
    }
    map(img, |v| v.powf(gamma))
}

/// Separable `k×k` mean filter with reflect-101 borders.
pub(crate) fn box_blur(img: &Image, k: usize) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let r = (k / 2) as isize;
    let src = img.data();
    let mut tmp = vec![0.0f64; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for d in -r..=r {
                    let xx = reflect101(x as isize + d, w);
                    acc += f64::from(src[(y * w + xx) * c + ch]);
                }
                tmp[(y * w + x) * c + ch] = acc / k as f64;
            }
        }
    }
    let mut out = vec![0.0f32; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for d in -r..=r {
                    let yy = reflect101(y as isize + d, h);
                    acc += tmp[(yy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = (acc / k as f64) as f32;
            }
        }
    }
    Image::from_raw(h, w, c, out)
}

/// Adds `N(0, sigma²)` to every value (unit scale), then clips.
pub(crate) fn gauss_noise(img: &Image, sigma: f64, rng: &mut RngState) -> Image {
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let data = img
        .data()
        .iter()
        .map(|&v| (f64::from(v) + normal.sample(rng)) as f32)
        .collect();
    Image::from_raw(img.height(), img.width(), img.channels(), data)
}

pub(crate) fn uniform(rng: &mut RngState, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Image {
        Image::from_fn(4, 5, 3, |y, x, c| (y * 5 + x) as f32 / 20.0 + c as f32 * 0.01).unwrap()
    }

    #[test]
    fn gray_replicates_luma() {
        let g = to_gray(&ramp());
        assert_eq!(g.channels(), 3);
        for px in g.data().chunks(3) {
            assert_eq!(px[0], px[1]);
            assert_eq!(px[1], px[2]);
        }
    }

    #[test]
    fn unit_magnitudes_are_identities() {
        let img = ramp();
        assert_eq!(gamma(&img, 1.0), img);
        assert_eq!(brightness(&img, 1.0), img);
        let c = contrast(&img, 1.0);
        for (a, b) in c.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Image::filled(3, 3, 1, 0.4).unwrap();
        let b = box_blur(&img, 7);
        assert!(b.data().iter().all(|v| (v - 0.4).abs() < 1e-6));
    }
}
