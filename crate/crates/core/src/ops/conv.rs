//! 2-D convolution through im2col and a GEMM per sample.

use rayon::prelude::*;

use super::{expect_rank4, gemm};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn new(input: &Tensor, kernel: &Tensor, stride: usize, pad: usize) -> Result<Self> {
        let [n, ci, h, w] = expect_rank4("conv2d", input)?;
        let [co, kci, kh, kw] = expect_rank4("conv2d", kernel)?;
        if kci != ci {
            return Err(Error::shape(
                "conv2d",
                format!("input has {ci} channels but kernel expects {kci}"),
            ));
        }
        if !matches!(kh, 1 | 3) || !matches!(kw, 1 | 3) {
            return Err(Error::shape(
                "conv2d",
                format!("kernel must be 1x1 or 3x3, got {kh}x{kw}"),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
        }
        let out_extent = |len: usize, k: usize| -> Result<usize> {
            let span = (len + 2 * pad).checked_sub(k).ok_or_else(|| {
                Error::shape("conv2d", format!("kernel {k} exceeds padded extent"))
            })?;
            if span % stride != 0 {
                return Err(Error::shape(
                    "conv2d",
                    format!(
                        "({len} + 2*{pad} - {k}) is not divisible by stride {stride}; output extent would not be an integer"
                    ),
                ));
            }
            Ok(span / stride + 1)
        };
        let ho = out_extent(h, kh)?;
        let wo = out_extent(w, kw)?;
        Ok(Self {
            n,
            ci,
            h,
            w,
            co,
            kh,
            kw,
            stride,
            pad,
            ho,
            wo,
        })
    }

    fn patch(&self) -> usize {
        self.ci * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }

    fn in_sample(&self) -> usize {
        self.ci * self.h * self.w
    }

    /// A 1x1, stride-1, unpadded conv reads the input plane directly.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let p = self.out_plane();
        for c in 0..self.ci {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        let out_row = &mut dst[oy * self.wo..(oy + 1) * self.wo];
                        if iy < 0 || iy >= self.h as isize {
                            out_row.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, v) in out_row.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            *v = if ix < 0 || ix >= self.w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], x: &mut [f64]) {
        let p = self.out_plane();
        x.fill(0.0);
        for c in 0..self.ci {
            let plane = &mut x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in 0..self.wo {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += src[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input (N, Ci, H, W)` with `kernel (Co, Ci, kh, kw)`
/// plus a per-output-channel `bias (Co)`.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = Geometry::new(input, kernel, stride, pad)?;
    if bias.numel() != g.co {
        return Err(Error::shape(
            "conv2d",
            format!(
                "bias has {} values for {} output channels",
                bias.numel(),
                g.co
            ),
        ));
    }
    let p = g.out_plane();
    let mut out = vec![0.0; g.n * g.co * p];
    let x = input.data();
    let k = kernel.data();
    let b = bias.data();
    out.par_chunks_mut(g.co * p)
        .enumerate()
        .for_each(|(s, dst)| {
            let xs = &x[s * g.in_sample()..(s + 1) * g.in_sample()];
            if g.is_pointwise() {
                gemm::matmul(k, xs, dst, g.co, g.patch(), p, false);
            } else {
                let mut cols = vec![0.0; g.patch() * p];
                g.im2col(xs, &mut cols);
                gemm::matmul(k, &cols, dst, g.co, g.patch(), p, false);
            }
            for (o, row) in dst.chunks_mut(p).enumerate() {
                let bo = b[o];
                row.iter_mut().for_each(|v| *v += bo);
            }
        });
    Tensor::from_vec(&[g.n, g.co, g.ho, g.wo], out)
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
///
/// Per-sample kernel and bias contributions are summed in sample order so the
/// result does not depend on how the batch was scheduled across threads.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Conv2dGrads> {
    let g = Geometry::new(input, kernel, stride, pad)?;
    if grad_out.shape() != [g.n, g.co, g.ho, g.wo] {
        return Err(Error::shape(
            "conv2d_backward",
            format!(
                "upstream gradient {:?} does not match output {:?}",
                grad_out.shape(),
                [g.n, g.co, g.ho, g.wo]
            ),
        ));
    }
    let p = g.out_plane();
    let kc = g.patch();
    let x = input.data();
    let k = kernel.data();
    let gy = grad_out.data();

    let mut grad_in = vec![0.0; input.numel()];
    let partials: Vec<(Vec<f64>, Vec<f64>)> = grad_in
        .par_chunks_mut(g.in_sample())
        .enumerate()
        .map(|(s, gx)| {
            let xs = &x[s * g.in_sample()..(s + 1) * g.in_sample()];
            let gys = &gy[s * g.co * p..(s + 1) * g.co * p];
            let mut gk = vec![0.0; g.co * kc];
            let gb: Vec<f64> = gys.chunks(p).map(|row| row.iter().sum()).collect();
            if g.is_pointwise() {
                gemm::matmul_a_bt(gys, xs, &mut gk, g.co, p, kc);
                gemm::matmul_at_b(k, gys, gx, kc, g.co, p);
            } else {
                let mut cols = vec![0.0; kc * p];
                g.im2col(xs, &mut cols);
                gemm::matmul_a_bt(gys, &cols, &mut gk, g.co, p, kc);
                gemm::matmul_at_b(k, gys, &mut cols, kc, g.co, p);
                g.col2im(&cols, gx);
            }
            (gk, gb)
        })
        .collect();

    let mut grad_k = vec![0.0; g.co * kc];
    let mut grad_b = vec![0.0; g.co];
    for (gk, gb) in &partials {
        grad_k.iter_mut().zip(gk).for_each(|(a, b)| *a += b);
        grad_b.iter_mut().zip(gb).for_each(|(a, b)| *a += b);
    }
    Ok(Conv2dGrads {
        input: Tensor::from_vec(input.shape(), grad_in)?,
        kernel: Tensor::from_vec(kernel.shape(), grad_k)?,
        bias: Tensor::from_vec(&[g.co], grad_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct seven-loop convolution used as an independent reference.
    fn naive_conv(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
        let [n, ci, h, w] = x.dims4();
        let [co, _, kh, kw] = k.dims4();
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (w + 2 * pad - kw) / stride + 1;
        let mut out = Tensor::zeros(&[n, co, ho, wo]);
        for s in 0..n {
            for o in 0..co {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = b.data()[o];
                        for c in 0..ci {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = (oy * stride + i) as isize - pad as isize;
                                    let ix = (ox * stride + j) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += x.data()
                                        [((s * ci + c) * h + iy as usize) * w + ix as usize]
                                        * k.data()[((o * ci + c) * kh + i) * kw + j];
                                }
                            }
                        }
                        out.data_mut()[((s * co + o) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_pointwise_kernel() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn same_padding_keeps_extent() {
        let x = Tensor::zeros(&[1, 1, 4, 4]);
        let k = Tensor::zeros(&[1, 1, 3, 3]);
        let y = conv2d(&x, &k, &Tensor::zeros(&[1]), 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
    }

    #[test]
    fn matches_naive_reference() {
        let x = Tensor::from_fn(&[2, 3, 6, 5], |i| ((i * 7919) % 23) as f64 / 11.0 - 1.0);
        let k = Tensor::from_fn(&[4, 3, 3, 3], |i| ((i * 104729) % 17) as f64 / 8.0 - 1.0);
        let b = Tensor::from_vec(&[4], vec![0.1, -0.2, 0.3, 0.0]).unwrap();
        for (stride, pad) in [(1, 1), (1, 0), (2, 1)] {
            let h_ok = (6 + 2 * pad - 3) % stride == 0 && (5 + 2 * pad - 3) % stride == 0;
            if !h_ok {
                assert!(conv2d(&x, &k, &b, stride, pad).is_err());
                continue;
            }
            let got = conv2d(&x, &k, &b, stride, pad).unwrap();
            let want = naive_conv(&x, &k, &b, stride, pad);
            assert_eq!(got.shape(), want.shape());
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn rejects_mismatches() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let b = Tensor::zeros(&[1]);
        assert!(conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), &b, 1, 1).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 5, 5]), &b, 1, 2).is_err());
        assert!(conv2d(
            &x,
            &Tensor::zeros(&[1, 2, 3, 3]),
            &Tensor::zeros(&[2]),
            1,
            1
        )
        .is_err());
        // (4 + 0 - 3) = 1 is not divisible by stride 2
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 3, 3]), &b, 2, 0).is_err());
    }
}
