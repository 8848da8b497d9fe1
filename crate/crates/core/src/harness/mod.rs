//! Experiment plumbing: configuration, data preparation, training loops,
//! evaluation reports and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod eval;
pub mod gradient;
pub mod train;

pub use checkpoint::{Checkpoint, DType};
pub use config::{RegressorInput, TrainConfig};
pub use data::Prepared;
pub use eval::{code_ious, eval_ie, eval_le, field_iou, EvalReport, SampleReport};
pub use gradient::check_pipeline_gradients;
pub use train::{
    train_ie, train_ie_from, train_sr, train_sr_from, CodeTargets, EpochLog, TrainingLog,
};

use serde::{Deserialize, Serialize};

use crate::implicit::{CodeRegressor, ImplicitModel};
use crate::{Error, Result};

/// Which network a checkpoint holds; stored alongside the training config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ie,
    Sr,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: ModelKind,
    config: TrainConfig,
}

fn meta_json(kind: ModelKind, config: &TrainConfig) -> String {
    serde_json::to_string(&CheckpointMeta {
        kind,
        config: config.clone(),
    })
    .expect("config serializes")
}

fn read_meta(ckpt: &Checkpoint, want: ModelKind) -> Result<TrainConfig> {
    let meta: CheckpointMeta = serde_json::from_str(&ckpt.config)
        .map_err(|e| Error::Checkpoint(format!("config block: {e}")))?;
    if meta.kind != want {
        return Err(Error::Checkpoint(format!(
            "expected a {want:?} checkpoint, found {:?}",
            meta.kind
        )));
    }
    Ok(meta.config)
}

pub fn ie_checkpoint(model: &ImplicitModel, config: &TrainConfig) -> Checkpoint {
    Checkpoint::from_store(&model.store, meta_json(ModelKind::Ie, config))
}

pub fn sr_checkpoint(reg: &CodeRegressor, config: &TrainConfig) -> Checkpoint {
    Checkpoint::from_store(&reg.store, meta_json(ModelKind::Sr, config))
}

pub fn load_ie(ckpt: &Checkpoint) -> Result<(ImplicitModel, TrainConfig)> {
    let config = read_meta(ckpt, ModelKind::Ie)?;
    let mut model = ImplicitModel::new(config.model_config(), config.seed)?;
    model.load_params(ckpt.to_store()?)?;
    Ok((model, config))
}

pub fn load_sr(ckpt: &Checkpoint) -> Result<(CodeRegressor, TrainConfig)> {
    let config = read_meta(ckpt, ModelKind::Sr)?;
    let mut reg = CodeRegressor::new(config.regressor_config(), config.seed)?;
    reg.load_params(ckpt.to_store()?)?;
    Ok((reg, config))
}
