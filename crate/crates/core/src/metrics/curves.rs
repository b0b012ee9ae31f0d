//! Per-epoch training curves.
//!
//! Column order: `epoch,split,loss,dice,iou,accuracy,precision,recall`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: usize,
    /// `train` or `val`.
    pub split: String,
    pub loss: f64,
    pub dice: f64,
    pub iou: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn write_curves(rows: &[CurveRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
