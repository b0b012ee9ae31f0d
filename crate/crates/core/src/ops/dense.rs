use super::gemm;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Affine map `input (N, F) · weight (F, G) + bias (G)`.
pub fn dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, f, g) = check(input, weight)?;
    if bias.numel() != g {
        return Err(Error::shape(
            "dense",
            format!("bias has {} values for {g} outputs", bias.numel()),
        ));
    }
    let mut out = vec![0.0; n * g];
    gemm::matmul(input.data(), weight.data(), &mut out, n, f, g, false);
    for row in out.chunks_mut(g) {
        row.iter_mut().zip(bias.data()).for_each(|(v, b)| *v += b);
    }
    Tensor::from_vec(&[n, g], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (n, f, g) = check(input, weight)?;
    if grad_out.numel() != n * g {
        return Err(Error::shape(
            "dense_backward",
            format!(
                "upstream gradient {:?} for output ({n}, {g})",
                grad_out.shape()
            ),
        ));
    }
    let gy = grad_out.data();
    let mut gx = vec![0.0; n * f];
    gemm::matmul_a_bt(gy, weight.data(), &mut gx, n, g, f);
    let mut gw = vec![0.0; f * g];
    gemm::matmul_at_b(input.data(), gy, &mut gw, f, n, g);
    let mut gb = vec![0.0; g];
    for row in gy.chunks(g) {
        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(input.shape(), gx)?,
        weight: Tensor::from_vec(weight.shape(), gw)?,
        bias: Tensor::from_vec(&[g], gb)?,
    })
}

fn check(input: &Tensor, weight: &Tensor) -> Result<(usize, usize, usize)> {
    let (n, f) = input.dims2();
    if weight.rank() != 2 {
        return Err(Error::shape(
            "dense",
            format!("weight must be (F, G), got {:?}", weight.shape()),
        ));
    }
    let (wf, g) = (weight.shape()[0], weight.shape()[1]);
    if wf != f {
        return Err(Error::shape(
            "dense",
            format!("input has {f} features, weight expects {wf}"),
        ));
    }
    Ok((n, f, g))
}
