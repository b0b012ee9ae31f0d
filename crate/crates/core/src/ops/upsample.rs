//! Bilinear 2x upsampling, half-pixel centres (`align_corners = false`).

use super::expect_rank4;
use crate::error::Result;
use crate::tensor::Tensor;

/// Per-output-index source taps: `(lo, hi, weight_of_hi)`.
fn taps(in_len: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * in_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * 0.5 - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

// Interpolation is written as `a + w * (b - a)` so equal taps reproduce
// their value exactly.
#[inline]
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + w * (b - a)
}

pub fn upsample_bilinear2x(input: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = expect_rank4("upsample_bilinear2x", input)?;
    let ty = taps(h);
    let tx = taps(w);
    let (ho, wo) = (2 * h, 2 * w);
    let x = input.data();
    let mut out = vec![0.0; n * c * ho * wo];
    for plane in 0..n * c {
        let src = &x[plane * h * w..(plane + 1) * h * w];
        let dst = &mut out[plane * ho * wo..(plane + 1) * ho * wo];
        for (oy, &(y0, y1, wy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx)) in tx.iter().enumerate() {
                let top = lerp(src[y0 * w + x0], src[y0 * w + x1], wx);
                let bottom = lerp(src[y1 * w + x0], src[y1 * w + x1], wx);
                dst[oy * wo + ox] = lerp(top, bottom, wy);
            }
        }
    }
    Tensor::from_vec(&[n, c, ho, wo], out)
}

/// Transpose of [`upsample_bilinear2x`]; `input_shape` is the forward input.
pub fn upsample_bilinear2x_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let mut grad = Tensor::zeros(input_shape);
    let [n, c, h, w] = expect_rank4("upsample_bilinear2x_backward", &grad)?;
    let ty = taps(h);
    let tx = taps(w);
    let (ho, wo) = (2 * h, 2 * w);
    let gy = grad_out.data();
    let gx = grad.data_mut();
    for plane in 0..n * c {
        let src = &gy[plane * ho * wo..(plane + 1) * ho * wo];
        let dst = &mut gx[plane * h * w..(plane + 1) * h * w];
        for (oy, &(y0, y1, wy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx)) in tx.iter().enumerate() {
                let g = src[oy * wo + ox];
                let g_top = g * (1.0 - wy);
                let g_bottom = g * wy;
                dst[y0 * w + x0] += g_top * (1.0 - wx);
                dst[y0 * w + x1] += g_top * wx;
                dst[y1 * w + x0] += g_bottom * (1.0 - wx);
                dst[y1 * w + x1] += g_bottom * wx;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_stay_exact() {
        let x = Tensor::full(&[2, 3, 5, 4], 0.3);
        let y = upsample_bilinear2x(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3, 10, 8]);
        assert!(y.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn half_pixel_weights_on_a_row() {
        let (a, b) = (2.0, 10.0);
        let x = Tensor::from_vec(&[1, 1, 1, 2], vec![a, b]).unwrap();
        let y = upsample_bilinear2x(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 4]);
        let want = [a, 0.75 * a + 0.25 * b, 0.25 * a + 0.75 * b, b];
        for row in 0..2 {
            for (i, w) in want.iter().enumerate() {
                assert!((y.data()[row * 4 + i] - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_is_transpose() {
        // <U x, g> == <x, U^T g> for arbitrary x, g
        let x = Tensor::from_fn(&[1, 2, 3, 4], |i| (i as f64 * 0.7).sin());
        let g = Tensor::from_fn(&[1, 2, 6, 8], |i| (i as f64 * 0.3).cos());
        let ux = upsample_bilinear2x(&x).unwrap();
        let utg = upsample_bilinear2x_backward(x.shape(), &g).unwrap();
        let lhs: f64 = ux.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(utg.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
