use super::mask::BinaryMask;
use crate::error::{Error, Result};

/// One-vs-rest pixel tallies of a prediction against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl PixelCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Pooled Dice over all pixels tallied; 1.0 when both sides are empty.
    pub fn dice(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    pub fn add(&mut self, other: PixelCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check(op: &'static str, a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::shape(
            op,
            format!(
                "{}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            ),
        ));
    }
    Ok(())
}

pub fn pixel_counts(pred: &BinaryMask, truth: &BinaryMask) -> Result<PixelCounts> {
    check("pixel_counts", pred, truth)?;
    let mut c = PixelCounts::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// `2|a ∩ b| / (|a| + |b|)`; two empty masks score 1.0.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = pixel_counts(a, b)?;
    Ok(c.dice())
}

/// `|a ∩ b| / |a ∪ b|`; two empty masks score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = pixel_counts(a, b)?;
    let union = c.tp + c.fp + c.fn_;
    Ok(if union == 0 {
        1.0
    } else {
        c.tp as f64 / union as f64
    })
}

/// Fraction of pixels on which the masks agree.
pub fn pixel_accuracy(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let c = pixel_counts(pred, truth)?;
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bits: &[u8]) -> BinaryMask {
        BinaryMask::from_bits(bits.len(), 1, bits.to_vec()).unwrap()
    }

    #[test]
    fn perfect_and_disjoint() {
        let a = row(&[1, 1, 0, 0]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let b = row(&[0, 0, 1, 1]);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn half_overlap() {
        // |a| = 4, |b| = 4, |a ∩ b| = 2
        let a = row(&[1, 1, 1, 1, 0, 0]);
        let b = row(&[0, 0, 1, 1, 1, 1]);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn both_empty_is_perfect() {
        let e = BinaryMask::empty(3, 3);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn pixel_accuracy_counts() {
        let a = BinaryMask::from_fn(4, 4, |x, y| (x + y) % 2 == 0);
        assert_eq!(pixel_accuracy(&a, &a).unwrap(), 1.0);
        let comp = BinaryMask::from_fn(4, 4, |x, y| (x + y) % 2 == 1);
        assert_eq!(pixel_accuracy(&a, &comp).unwrap(), 0.0);
        let mut three_off = a.clone();
        for (x, y) in [(0, 0), (1, 0), (3, 3)] {
            three_off.set(x, y, !a.get(x, y));
        }
        assert_eq!(pixel_accuracy(&three_off, &a).unwrap(), 13.0 / 16.0);
    }

    #[test]
    fn mismatched_dims() {
        assert!(dice(&BinaryMask::empty(2, 2), &BinaryMask::empty(2, 3)).is_err());
        assert!(iou(&BinaryMask::empty(2, 2), &BinaryMask::empty(3, 2)).is_err());
        assert!(pixel_accuracy(&BinaryMask::empty(2, 2), &BinaryMask::empty(1, 2)).is_err());
    }
}
