use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient passes where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

/// Uses the forward output `y`: `dy/dx = y (1 - y)`.
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &y) in g.data_mut().iter_mut().zip(output.data()) {
        *gv *= y * (1.0 - y);
    }
    g
}

/// Row-wise softmax over the last extent, computed after subtracting the row maximum.
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    let k = *x.shape().last().unwrap();
    if k == 0 {
        return Err(Error::shape("softmax", "last extent is empty"));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

pub fn softmax_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let k = *output.shape().last().unwrap();
    let mut g = grad_out.clone();
    for (grow, yrow) in g.data_mut().chunks_mut(k).zip(output.data().chunks(k)) {
        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
        for (gv, &y) in grow.iter_mut().zip(yrow) {
            *gv = y * (*gv - dot);
        }
    }
    g
}
