use super::expect_rank4;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output of a 2x2/2 max-pool plus, per output element, the flat input index
/// of the element that won the window.
#[derive(Debug, Clone)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// 2x2 max-pool with stride 2. Ties go to the first maximum in row-major
/// window order.
pub fn maxpool2d(input: &Tensor) -> Result<Pooled> {
    let [n, c, h, w] = expect_rank4("maxpool2d", input)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(
            "maxpool2d",
            format!("spatial extent {h}x{w} must be even"),
        ));
    }
    let (ho, wo) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * ho * wo);
    let mut argmax = Vec::with_capacity(n * c * ho * wo);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::from_vec(&[n, c, ho, wo], out)?,
        argmax,
    })
}

/// Routes each upstream gradient to its recorded window winner.
pub fn maxpool2d_backward(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor,
) -> Result<Tensor> {
    if argmax.len() != grad_out.numel() {
        return Err(Error::shape(
            "maxpool2d_backward",
            format!(
                "{} argmax entries for {} gradients",
                argmax.len(),
                grad_out.numel()
            ),
        ));
    }
    let mut grad = Tensor::zeros(input_shape);
    let gx = grad.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        gx[idx] += g;
    }
    Ok(grad)
}
