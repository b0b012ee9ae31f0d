#![allow(dead_code)]

use lungnet::metrics::{BinaryMask, ConfusionMatrix};
use lungnet::net::{ArchConfig, SkipMode};
use lungnet::synth::{generate_phantom, Label, Sample};
use lungnet::{Rng, Tensor};

/// Central differences, written independently of the library's checker.
pub fn central_diff(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, eps: f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.numel())
        .map(|i| {
            let v = x.data()[i];
            probe.data_mut()[i] = v + eps;
            let hi = f(&probe);
            probe.data_mut()[i] = v - eps;
            let lo = f(&probe);
            probe.data_mut()[i] = v;
            (hi - lo) / (2.0 * eps)
        })
        .collect()
}

/// Largest `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

pub fn randn(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.normal(0.0, 1.0))
}

/// Distinct, well separated values so no kink is crossed by a small step.
pub fn spaced(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    Tensor::from_fn(shape, |i| (order[i] as f64 + 0.5) / n as f64 * 4.0 - 2.0)
}

pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        levels: 2,
        base_width: 2,
        input_hw: 16,
        skip_mode: SkipMode::Streamlined,
        with_classifier: true,
        num_classes: 3,
        dropout_rate: 0.5,
        classifier_width: 4,
        dense_widths: [8, 6],
    }
}

/// Small network that still trains on 32x32 phantoms.
pub fn small_arch() -> ArchConfig {
    ArchConfig {
        levels: 3,
        base_width: 2,
        input_hw: 32,
        skip_mode: SkipMode::Streamlined,
        with_classifier: true,
        num_classes: 3,
        dropout_rate: 0.5,
        classifier_width: 8,
        dense_widths: [16, 8],
    }
}

pub fn phantoms(n: usize, hw: usize, seed: u64) -> Vec<Sample> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| generate_phantom(&mut rng, Label::ALL[i % 3], hw).unwrap())
        .collect()
}

pub fn random_mask(rng: &mut Rng, density: f64) -> BinaryMask {
    BinaryMask::from_fn(16, 16, |_, _| rng.uniform() < density)
}

/// Dice, IoU and pixel accuracy of two 16x16 masks by walking coordinates.
pub fn brute_overlap(a: &BinaryMask, b: &BinaryMask) -> (f64, f64, f64) {
    let (mut inter, mut sa, mut sb, mut agree) = (0u32, 0u32, 0u32, 0u32);
    for y in 0..16 {
        for x in 0..16 {
            let (p, q) = (a.get(x, y), b.get(x, y));
            inter += (p && q) as u32;
            sa += p as u32;
            sb += q as u32;
            agree += (p == q) as u32;
        }
    }
    let union = sa + sb - inter;
    let d = if sa + sb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (sa + sb) as f64
    };
    let j = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };
    (d, j, agree as f64 / 256.0)
}

/// Random `k x k` counts with some empty cells.
pub fn random_counts(rng: &mut Rng, k: usize) -> Vec<u64> {
    (0..k * k)
        .map(|_| {
            if rng.uniform() < 0.15 {
                0
            } else {
                rng.int_range(0, 60) as u64
            }
        })
        .collect()
}

/// Compares every derived confusion metric against direct counting.
/// Returns a description of the first mismatch.
pub fn confusion_mismatch(k: usize, counts: &[u64]) -> Option<String> {
    const EXACT: f64 = 1e-12;
    let report = ConfusionMatrix::from_counts(k, counts.to_vec())
        .unwrap()
        .report();
    let total: u64 = counts.iter().sum();
    let at = |t: usize, p: usize| counts[t * k + p];
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut sens_sum, mut prec_sum) = (0.0, 0.0);
    for c in 0..k {
        let tp = at(c, c);
        let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| at(c, p)).sum();
        let fp: u64 = (0..k).filter(|&t| t != c).map(|t| at(t, c)).sum();
        let tn = total - tp - fn_ - fp;
        let s = &report.per_class[c];
        let pairs = [
            ("sensitivity", s.sensitivity, div(tp, tp + fn_)),
            ("precision", s.precision, div(tp, tp + fp)),
            ("accuracy", s.accuracy, div(tp + tn, total)),
            (
                "literal sensitivity",
                s.paper_literal_sensitivity,
                div(tp, tp + fp),
            ),
            (
                "literal precision",
                s.paper_literal_precision,
                div(tp, tp + fn_),
            ),
        ];
        if (s.tp, s.fp, s.fn_, s.tn) != (tp, fp, fn_, tn) {
            return Some(format!("class {c} counts differ"));
        }
        for (name, got, want) in pairs {
            if (got - want).abs() > EXACT {
                return Some(format!("class {c} {name}: {got} vs {want}"));
            }
        }
        sens_sum += div(tp, tp + fn_);
        prec_sum += div(tp, tp + fp);
    }
    let trace: u64 = (0..k).map(|c| at(c, c)).sum();
    let overall = [
        (
            "overall accuracy",
            report.overall_accuracy,
            div(trace, total),
        ),
        (
            "macro sensitivity",
            report.macro_sensitivity,
            sens_sum / k as f64,
        ),
        (
            "macro precision",
            report.macro_precision,
            prec_sum / k as f64,
        ),
    ];
    overall
        .iter()
        .find(|(_, got, want)| (got - want).abs() > EXACT)
        .map(|(name, got, want)| format!("{name}: {got} vs {want}"))
}
