//! Forward/backward kernels for the tiny networks.

use super::tensor::{gemm, Tensor};

/// Unfolds one `c×h×w` sample into a `(c·k·k)×(h·w)` matrix for a stride-1,
/// same-padded `k×k` convolution.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, k: usize, cols: &mut [f64]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let out = &mut cols[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    for xx in 0..w {
                        let sx = xx as isize + kx as isize - pad;
                        out[y * w + xx] = if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            0.0
                        } else {
                            x[(ci * h + sy as usize) * w + sx as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], c: usize, h: usize, w: usize, k: usize, dx: &mut [f64]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for xx in 0..w {
                        let sx = xx as isize + kx as isize - pad;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        dx[(ci * h + sy as usize) * w + sx as usize] += src[y * w + xx];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
}

impl Conv {
    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.k * self.k
    }

    pub fn forward(&self, x: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
        let (h, w) = (x.h, x.w);
        let hw = h * w;
        let kk = self.in_c * self.k * self.k;
        let mut out = Tensor::zeros(x.n, self.out_c, h, w);
        let mut cols = vec![0.0; kk * hw];
        for i in 0..x.n {
            im2col(x.sample(i), self.in_c, h, w, self.k, &mut cols);
            let o = &mut out.data[i * self.out_c * hw..(i + 1) * self.out_c * hw];
            for (oc, chunk) in o.chunks_mut(hw).enumerate() {
                chunk.fill(bias[oc]);
            }
            gemm(self.out_c, kk, hw, weight, false, &cols, false, 1.0, o);
        }
        out
    }

    /// Accumulates weight/bias gradients; returns the input gradient when asked.
    pub fn backward(
        &self,
        x: &Tensor,
        weight: &[f64],
        dy: &Tensor,
        dweight: &mut [f64],
        dbias: &mut [f64],
        need_dx: bool,
    ) -> Option<Tensor> {
        let (h, w) = (x.h, x.w);
        let hw = h * w;
        let kk = self.in_c * self.k * self.k;
        let mut cols = vec![0.0; kk * hw];
        let mut dcols = vec![0.0; kk * hw];
        let mut dx = need_dx.then(|| Tensor::zeros(x.n, self.in_c, h, w));
        for i in 0..x.n {
            let g = dy.sample(i);
            for (oc, chunk) in g.chunks(hw).enumerate() {
                dbias[oc] += chunk.iter().sum::<f64>();
            }
            im2col(x.sample(i), self.in_c, h, w, self.k, &mut cols);
            gemm(self.out_c, hw, kk, g, false, &cols, true, 1.0, dweight);
            if let Some(dx) = dx.as_mut() {
                gemm(kk, self.out_c, hw, weight, true, g, false, 0.0, &mut dcols);
                let s = self.in_c * hw;
                col2im(&dcols, self.in_c, h, w, self.k, &mut dx.data[i * s..(i + 1) * s]);
            }
        }
        dx
    }
}

pub(crate) fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Gradient through ReLU given the pre-activation.
pub(crate) fn relu_backward(pre: &Tensor, dy: &mut Tensor) {
    for (g, &p) in dy.data.iter_mut().zip(&pre.data) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2×2 max pooling (floor); returns the output and the flat argmax per cell.
pub(crate) fn maxpool2(x: &Tensor) -> (Tensor, Vec<usize>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(x.n, x.c, oh, ow);
    let mut arg = vec![0usize; out.data.len()];
    let mut o = 0;
    for plane in 0..x.n * x.c {
        let base = plane * x.h * x.w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = base + (2 * y + dy) * x.w + 2 * xx + dx;
                        if x.data[idx] > best {
                            best = x.data[idx];
                            at = idx;
                        }
                    }
                }
                out.data[o] = best;
                arg[o] = at;
                o += 1;
            }
        }
    }
    (out, arg)
}

pub(crate) fn maxpool2_backward(input_shape: [usize; 4], arg: &[usize], dy: &Tensor) -> Tensor {
    let [n, c, h, w] = input_shape;
    let mut dx = Tensor::zeros(n, c, h, w);
    for (g, &a) in dy.data.iter().zip(arg) {
        dx.data[a] += g;
    }
    dx
}

/// Global average pooling to an `n×c` row-major matrix.
pub(crate) fn gap(x: &Tensor) -> Vec<f64> {
    let hw = (x.h * x.w) as f64;
    x.data.chunks(x.h * x.w).map(|p| p.iter().sum::<f64>() / hw).collect()
}

pub(crate) fn gap_backward(shape: [usize; 4], dg: &[f64]) -> Tensor {
    let [n, c, h, w] = shape;
    let hw = h * w;
    let mut dx = Tensor::zeros(n, c, h, w);
    for (plane, &g) in dg.iter().enumerate() {
        dx.data[plane * hw..(plane + 1) * hw].fill(g / hw as f64);
    }
    dx
}

/// `y = x·Wᵀ + b` with `x: n×in`, `W: out×in`.
pub(crate) fn linear(x: &[f64], n: usize, in_f: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let out_f = bias.len();
    let mut y: Vec<f64> = (0..n).flat_map(|_| bias.iter().copied()).collect();
    gemm(n, in_f, out_f, x, false, weight, true, 1.0, &mut y);
    y
}

/// Accumulates `dW`, `db` and `dx` for [`linear`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    n: usize,
    in_f: usize,
    weight: &[f64],
    dy: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    let out_f = dbias.len();
    for row in dy.chunks(out_f) {
        for (b, g) in dbias.iter_mut().zip(row) {
            *b += g;
        }
    }
    gemm(out_f, n, in_f, dy, true, x, false, 1.0, dweight);
    gemm(n, out_f, in_f, dy, false, weight, false, 1.0, dx);
}
