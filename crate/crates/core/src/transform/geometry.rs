//! Index-remapping kernels shared by images and masks.

use super::image::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Interp {
    Nearest,
    Bilinear,
}

/// Reflect-101 border handling (`gfedcb|abcdefgh|gfedcba`).
#[inline]
pub(crate) fn reflect101(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

fn remap(src: &Plane, out_h: usize, out_w: usize, mut f: impl FnMut(usize, usize) -> (usize, usize)) -> Plane {
    let c = src.channels;
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sy, sx) = f(y, x);
            let base = (sy * src.width + sx) * c;
            data.extend_from_slice(&src.data[base..base + c]);
        }
    }
    Plane {
        height: out_h,
        width: out_w,
        channels: c,
        data,
    }
}

pub(crate) fn hflip(p: &Plane) -> Plane {
    remap(p, p.height, p.width, |y, x| (y, p.width - 1 - x))
}

pub(crate) fn vflip(p: &Plane) -> Plane {
    remap(p, p.height, p.width, |y, x| (p.height - 1 - y, x))
}

pub(crate) fn transpose(p: &Plane) -> Plane {
    remap(p, p.width, p.height, |y, x| (x, y))
}

/// Counter-clockwise rotation by `k` quarter turns.
pub(crate) fn rot90(p: &Plane, k: u8) -> Plane {
    match k % 4 {
        0 => p.clone(),
        1 => remap(p, p.width, p.height, |y, x| (x, p.width - 1 - y)),
        2 => remap(p, p.height, p.width, |y, x| (p.height - 1 - y, p.width - 1 - x)),
        _ => remap(p, p.width, p.height, |y, x| (p.height - 1 - x, y)),
    }
}

pub(crate) fn crop(p: &Plane, top: usize, left: usize, h: usize, w: usize) -> Plane {
    debug_assert!(top + h <= p.height && left + w <= p.width);
    remap(p, h, w, |y, x| (top + y, left + x))
}

/// Resize with half-pixel-centre sampling.
pub(crate) fn resize(p: &Plane, out_h: usize, out_w: usize, interp: Interp) -> Plane {
    if out_h == p.height && out_w == p.width {
        return p.clone();
    }
    let sy = p.height as f64 / out_h as f64;
    let sx = p.width as f64 / out_w as f64;
    match interp {
        Interp::Nearest => remap(p, out_h, out_w, |y, x| {
            let yy = (((y as f64 + 0.5) * sy).floor() as usize).min(p.height - 1);
            let xx = (((x as f64 + 0.5) * sx).floor() as usize).min(p.width - 1);
            (yy, xx)
        }),
        Interp::Bilinear => {
            let c = p.channels;
            let mut data = Vec::with_capacity(out_h * out_w * c);
            for y in 0..out_h {
                let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (p.height - 1) as f64);
                let y0 = fy.floor() as usize;
                let y1 = (y0 + 1).min(p.height - 1);
                let wy = fy - y0 as f64;
                for x in 0..out_w {
                    let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (p.width - 1) as f64);
                    let x0 = fx.floor() as usize;
                    let x1 = (x0 + 1).min(p.width - 1);
                    let wx = fx - x0 as f64;
                    for ch in 0..c {
                        let v00 = f64::from(p.at(y0, x0, ch));
                        let v01 = f64::from(p.at(y0, x1, ch));
                        let v10 = f64::from(p.at(y1, x0, ch));
                        let v11 = f64::from(p.at(y1, x1, ch));
                        let top = v00 + (v01 - v00) * wx;
                        let bot = v10 + (v11 - v10) * wx;
                        data.push((top + (bot - top) * wy) as f32);
                    }
                }
            }
            Plane {
                height: out_h,
                width: out_w,
                channels: c,
                data,
            }
        }
    }
}

/// Zero-padding on every side.
pub(crate) fn pad(p: &Plane, amount: usize, fill: f32) -> Plane {
    let h = p.height + 2 * amount;
    let w = p.width + 2 * amount;
    let c = p.channels;
    let mut data = vec![fill; h * w * c];
    for y in 0..p.height {
        let dst = ((y + amount) * w + amount) * c;
        let src = y * p.width * c;
        data[dst..dst + p.width * c].copy_from_slice(&p.data[src..src + p.width * c]);
    }
    Plane {
        height: h,
        width: w,
        channels: c,
        data,
    }
}

/// Parameters of a similarity transform about the image centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Affine {
    pub angle_deg: f64,
    pub scale: f64,
    /// Shift as a fraction of width / height.
    pub dx: f64,
    pub dy: f64,
}

/// Warps with the forward map `p' = s·R(θ)(p − c) + c + t`, sampling the
/// inverse map. Borders reflect-101.
pub(crate) fn warp_affine(p: &Plane, a: Affine, interp: Interp, border: Border) -> Plane {
    let (h, w, c) = (p.height, p.width, p.channels);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let tx = a.dx * w as f64;
    let ty = a.dy * h as f64;
    // Image rows grow downwards, so a positive (counter-clockwise) angle uses -θ here.
    let theta = -a.angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let fetch = |yy: isize, xx: isize, ch: usize| -> f32 {
        match border {
            Border::Reflect101 => p.at(reflect101(yy, h), reflect101(xx, w), ch),
            Border::Constant(v) => {
                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                    v
                } else {
                    p.at(yy as usize, xx as usize, ch)
                }
            }
        }
    };
    let mut data = Vec::with_capacity(h * w * c);
    for y in 0..h {
        for x in 0..w {
            let ux = (x as f64 - cx - tx) / a.scale;
            let uy = (y as f64 - cy - ty) / a.scale;
            // inverse rotation
            let sx = cos * ux + sin * uy + cx;
            let sy = -sin * ux + cos * uy + cy;
            match interp {
                Interp::Nearest => {
                    let yy = sy.round() as isize;
                    let xx = sx.round() as isize;
                    for ch in 0..c {
                        data.push(fetch(yy, xx, ch));
                    }
                }
                Interp::Bilinear => {
                    let y0 = sy.floor();
                    let x0 = sx.floor();
                    let wy = sy - y0;
                    let wx = sx - x0;
                    let (y0, x0) = (y0 as isize, x0 as isize);
                    for ch in 0..c {
                        let v00 = f64::from(fetch(y0, x0, ch));
                        let v01 = f64::from(fetch(y0, x0 + 1, ch));
                        let v10 = f64::from(fetch(y0 + 1, x0, ch));
                        let v11 = f64::from(fetch(y0 + 1, x0 + 1, ch));
                        let top = v00 + (v01 - v00) * wx;
                        let bot = v10 + (v11 - v10) * wx;
                        data.push((top + (bot - top) * wy) as f32);
                    }
                }
            }
        }
    }
    Plane {
        height: h,
        width: w,
        channels: c,
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Border {
    Reflect101,
    Constant(f32),
}
