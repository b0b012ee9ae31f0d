//! Overlap and classification metrics.

mod confusion;
mod curves;
mod mask;
mod overlap;

pub use confusion::{ClassReport, ClassStats, ConfusionMatrix};
pub use curves::{write_curves, CurveRow};
pub use mask::BinaryMask;
pub use overlap::{dice, iou, pixel_accuracy, pixel_counts, PixelCounts};
