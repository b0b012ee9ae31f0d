use crate::error::{Error, Result};

/// `k x k` counts; rows are the true class, columns the predicted one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

/// One-vs-rest statistics for a single class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    /// `TP / (TP + FN)`.
    pub sensitivity: f64,
    /// `TP / (TP + FP)`.
    pub precision: f64,
    /// `(TP + TN) / total`.
    pub accuracy: f64,
    /// `TP / (TP + FP)`, the formula printed under the name "sensitivity"
    /// in the source of these metrics.
    pub paper_literal_sensitivity: f64,
    /// `TP / (TP + FN)`, printed there under the name "precision".
    pub paper_literal_precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub per_class: Vec<ClassStats>,
    pub macro_sensitivity: f64,
    pub macro_precision: f64,
    pub macro_accuracy: f64,
    /// Trace over total: the fraction of samples classified correctly.
    pub overall_accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    // a class that never occurs (or is never predicted) scores 0
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    /// Builds from row-major counts.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::shape(
                "confusion",
                format!("{k} classes need {} counts, got {}", k * k, counts.len()),
            ));
        }
        Ok(Self { k, counts })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.k || pred >= self.k {
            return Err(Error::InvalidArgument(format!(
                "label pair ({truth}, {pred}) out of range for {} classes",
                self.k
            )));
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    pub fn class_stats(&self, c: usize) -> ClassStats {
        let tp = self.get(c, c);
        let row: u64 = (0..self.k).map(|p| self.get(c, p)).sum();
        let col: u64 = (0..self.k).map(|t| self.get(t, c)).sum();
        let total = self.total();
        let fn_ = row - tp;
        let fp = col - tp;
        let tn = total - tp - fn_ - fp;
        ClassStats {
            tp,
            fp,
            fn_,
            tn,
            sensitivity: ratio(tp, tp + fn_),
            precision: ratio(tp, tp + fp),
            accuracy: ratio(tp + tn, total),
            paper_literal_sensitivity: ratio(tp, tp + fp),
            paper_literal_precision: ratio(tp, tp + fn_),
        }
    }

    pub fn report(&self) -> ClassReport {
        let per_class: Vec<ClassStats> = (0..self.k).map(|c| self.class_stats(c)).collect();
        let mean = |f: fn(&ClassStats) -> f64| {
            if self.k == 0 {
                0.0
            } else {
                per_class.iter().map(f).sum::<f64>() / self.k as f64
            }
        };
        let trace: u64 = (0..self.k).map(|c| self.get(c, c)).sum();
        ClassReport {
            macro_sensitivity: mean(|s| s.sensitivity),
            macro_precision: mean(|s| s.precision),
            macro_accuracy: mean(|s| s.accuracy),
            overall_accuracy: ratio(trace, self.total()),
            per_class,
        }
    }
}
