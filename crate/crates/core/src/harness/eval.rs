//! IoU evaluation of self-encoded and regressed reconstructions.

use serde::{Deserialize, Serialize};

use super::data::Prepared;
use crate::implicit::{CodeRegressor, ImplicitModel, ShapeCode};
use crate::layout::{compute_iou, threshold, OccupancyGrid};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: String,
    pub iou_ie: f64,
    pub iou_le: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_iou_ie: f64,
    pub mean_iou_le: Option<f64>,
    /// Sorted by id.
    pub samples: Vec<SampleReport>,
    pub config_hash: String,
    pub manifest_hash: String,
}

impl EvalReport {
    fn assemble(
        mut samples: Vec<SampleReport>,
        config_hash: String,
        manifest_hash: String,
    ) -> Self {
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        let n = samples.len().max(1) as f64;
        let mean_iou_ie = samples.iter().map(|s| s.iou_ie).sum::<f64>() / n;
        let mean_iou_le = samples
            .iter()
            .map(|s| s.iou_le)
            .collect::<Option<Vec<f64>>>()
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / n);
        EvalReport {
            mean_iou_ie,
            mean_iou_le,
            samples,
            config_hash,
            manifest_hash,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// IoU between a thresholded `o3` field and the ground-truth grid.
pub fn field_iou(field: &[f64], grid: &OccupancyGrid) -> Result<f64> {
    Ok(compute_iou(&threshold(field), grid.values())?.iou)
}

/// Decodes each code at all pixel centers and scores it against its grid.
pub fn code_ious(
    model: &ImplicitModel,
    codes: &[ShapeCode],
    grids: &[OccupancyGrid],
) -> Result<Vec<f64>> {
    if codes.len() != grids.len() {
        return Err(Error::ShapeMismatch {
            op: "code_ious",
            left: vec![codes.len()],
            right: vec![grids.len()],
        });
    }
    let fields = model.reconstruct(codes)?;
    fields
        .iter()
        .zip(grids)
        .map(|(f, g)| field_iou(f, g))
        .collect()
}

/// Encodes each grid, renders at all pixel centers, thresholds at 0.5.
pub fn eval_ie(model: &ImplicitModel, data: &Prepared, config_hash: &str) -> Result<EvalReport> {
    let grids: Vec<_> = data.grids.iter().collect();
    let codes = model.encode(&grids)?;
    let ie = code_ious(model, &codes, &data.grids)?;
    let samples = data
        .ids
        .iter()
        .zip(ie)
        .map(|(id, iou_ie)| SampleReport {
            id: id.clone(),
            iou_ie,
            iou_le: None,
        })
        .collect();
    Ok(EvalReport::assemble(
        samples,
        config_hash.into(),
        data.manifest_hash.clone(),
    ))
}

/// Regresses codes from `inputs`, decodes with the frozen model, and reports
/// both the regressed and the self-encoded IoU.
pub fn eval_le(
    regressor: &CodeRegressor,
    model: &ImplicitModel,
    data: &Prepared,
    inputs: &[Vec<f64>],
    config_hash: &str,
) -> Result<EvalReport> {
    if regressor.config.code_dim != model.config.code_dim {
        return Err(Error::Checkpoint(format!(
            "regressor code dimension {} does not match model {}",
            regressor.config.code_dim, model.config.code_dim
        )));
    }
    if inputs.len() != data.len() {
        return Err(Error::ShapeMismatch {
            op: "regressor inputs",
            left: vec![inputs.len()],
            right: vec![data.len()],
        });
    }
    let images: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let le_codes = regressor.predict(&images)?;
    let le = code_ious(model, &le_codes, &data.grids)?;
    let grids: Vec<_> = data.grids.iter().collect();
    let ie = code_ious(model, &model.encode(&grids)?, &data.grids)?;
    let samples = data
        .ids
        .iter()
        .zip(ie.into_iter().zip(le))
        .map(|(id, (iou_ie, iou_le))| SampleReport {
            id: id.clone(),
            iou_ie,
            iou_le: Some(iou_le),
        })
        .collect();
    Ok(EvalReport::assemble(
        samples,
        config_hash.into(),
        data.manifest_hash.clone(),
    ))
}
