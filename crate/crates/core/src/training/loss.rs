use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Scalar loss and its gradient with respect to the prediction tensor.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Tensor,
}

impl LossOutput {
    /// Multiplies value and gradient by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        self
    }
}

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy `-[c ln p + (1 - c) ln(1 - p)]`.
///
/// The gradient is evaluated at the clamped probability, so it stays finite
/// and non-zero for saturated predictions.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<LossOutput> {
    if !pred.same_shape(target) {
        return Err(Error::shape(
            "bce_loss",
            format!(
                "prediction {:?} vs target {:?}",
                pred.shape(),
                target.shape()
            ),
        ));
    }
    let n = pred.numel() as f64;
    let mut total = 0.0;
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &c) in grad
        .data_mut()
        .iter_mut()
        .zip(pred.data())
        .zip(target.data())
    {
        let p = clamp(p);
        total -= c * p.ln() + (1.0 - c) * (1.0 - p).ln();
        *g = (p - c) / (p * (1.0 - p)) / n;
    }
    Ok(LossOutput {
        value: total / n,
        grad,
    })
}

/// Mean of `-ln probs[row, label]` over rows of `probs (N, K)`.
pub fn categorical_ce_loss(probs: &Tensor, labels: &[usize]) -> Result<LossOutput> {
    let (n, k) = probs.dims2();
    if labels.len() != n {
        return Err(Error::shape(
            "categorical_ce_loss",
            format!("{} labels for {n} rows", labels.len()),
        ));
    }
    let mut total = 0.0;
    let mut grad = Tensor::zeros(probs.shape());
    for (row, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {k} classes"
            )));
        }
        let p = clamp(probs.data()[row * k + label]);
        total -= p.ln();
        grad.data_mut()[row * k + label] = -1.0 / p / n as f64;
    }
    Ok(LossOutput {
        value: total / n as f64,
        grad,
    })
}
