//! Turning network outputs into masks, a class and severity figures.

use crate::error::{Error, Result};
use crate::metrics::{iou, BinaryMask};
use crate::tensor::Tensor;

/// Default foreground threshold for probability maps.
pub const DEFAULT_TAU: f64 = 0.6;

/// Binarizes a `(1, 1, H, W)` (or `(H, W)`) probability map; a pixel is set
/// iff its probability is strictly greater than `tau`.
pub fn threshold_mask(probs: &Tensor, tau: f64) -> Result<BinaryMask> {
    let (h, w) = match *probs.shape() {
        [1, 1, h, w] | [1, h, w] | [h, w] => (h, w),
        _ => {
            return Err(Error::shape(
                "threshold_mask",
                format!(
                    "expected a single (1, 1, H, W) map, got {:?}",
                    probs.shape()
                ),
            ))
        }
    };
    BinaryMask::from_threshold(w, h, probs.data(), tau)
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax_class(probs: &[f64]) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument(
            "argmax of an empty probability vector".into(),
        ));
    }
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Infected pixels as a percentage of lung pixels. Infection outside the
/// lung is counted as-is.
pub fn severity(inf: &BinaryMask, lung: &BinaryMask) -> Result<f64> {
    if !inf.same_dims(lung) {
        return Err(Error::shape(
            "severity",
            format!(
                "infection mask is {}x{}, lung mask is {}x{}",
                inf.width(),
                inf.height(),
                lung.width(),
                lung.height()
            ),
        ));
    }
    let lung_px = lung.count();
    if lung_px == 0 {
        return Err(Error::Degenerate(
            "lung mask is empty; severity is undefined".into(),
        ));
    }
    Ok(100.0 * inf.count() as f64 / lung_px as f64)
}

/// Overlap of predicted and reference infection regions, as IoU.
pub fn infection_exactness(pred_inf: &BinaryMask, gt_inf: &BinaryMask) -> Result<f64> {
    iou(pred_inf, gt_inf)
}

/// Infected pixels lying outside the lung mask.
pub fn out_of_lung_pixels(inf: &BinaryMask, lung: &BinaryMask) -> Result<usize> {
    if !inf.same_dims(lung) {
        return Err(Error::shape(
            "out_of_lung_pixels",
            "mask dimensions differ".to_string(),
        ));
    }
    Ok(inf
        .bits()
        .iter()
        .zip(lung.bits())
        .filter(|&(&i, &l)| i == 1 && l == 0)
        .count())
}
