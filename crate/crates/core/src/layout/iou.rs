use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoUReport {
    pub intersection: usize,
    pub union: usize,
    pub iou: f64,
}

/// Pixel-wise intersection over union of two binary masks of equal size.
/// Any nonzero value counts as occupied.
pub fn compute_iou(a: &[u8], b: &[u8]) -> Result<IoUReport> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "compute_iou",
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x != 0, y != 0);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Err(Error::UndefinedIoU);
    }
    Ok(IoUReport {
        intersection: inter,
        union,
        iou: inter as f64 / union as f64,
    })
}

/// Binarizes occupancy values: `v >= 0.5` is occupied.
pub fn threshold(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&v| u8::from(v >= 0.5)).collect()
}
