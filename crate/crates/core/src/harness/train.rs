//! Training loops for the implicit encoder and the code regressor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::data::Prepared;
use crate::diffnet::{Adam, AdamConfig, Gradients, Graph};
use crate::implicit::{CodeRegressor, ImplicitModel, ShapeCode};
use crate::layout::sample_coords;
use crate::roomgen::mix_seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean batch objective, measured before each update.
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub occupancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grouping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub combining: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// `"ie"` or `"sr"`.
    pub kind: String,
    pub config_hash: String,
    pub manifest_hash: String,
    pub samples: usize,
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }
}

fn diverged(epoch: usize, batch: usize, term: &'static str, value: f64) -> Error {
    Error::Diverged {
        epoch,
        batch,
        term,
        value,
    }
}

fn guard<T>(r: Result<T>, epoch: usize, batch: usize, term: &'static str) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite { .. } => diverged(epoch, batch, term, f64::NAN),
        other => other,
    })
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(
        seed,
        epoch as u64,
        0x5EED,
    )));
    order
}

fn total_steps(n: usize, config: &TrainConfig) -> usize {
    n.div_ceil(config.batch_size) * config.epochs
}

fn optimizer(config: &TrainConfig) -> Adam {
    Adam::new(AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    })
}

fn check_grads(grads: &Gradients, epoch: usize, batch: usize) -> Result<()> {
    if grads.all_finite() {
        Ok(())
    } else {
        Err(diverged(epoch, batch, "gradient", f64::NAN))
    }
}

/// Trains the implicit encoder from a fresh initialization seeded by `config.seed`.
pub fn train_ie(data: &Prepared, config: &TrainConfig) -> Result<(ImplicitModel, TrainingLog)> {
    let model = ImplicitModel::new(config.model_config(), config.seed)?;
    train_ie_from(data, config, model, |_, _| {})
}

/// Trains `model` in place of a fresh one; `on_epoch` sees each epoch summary
/// together with the parameters reached at its end.
pub fn train_ie_from(
    data: &Prepared,
    config: &TrainConfig,
    mut model: ImplicitModel,
    mut on_epoch: impl FnMut(&EpochLog, &ImplicitModel),
) -> Result<(ImplicitModel, TrainingLog)> {
    config.validate()?;
    if model.config != config.model_config() {
        return Err(Error::Config(
            "initial model does not match the configured architecture".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut opt = optimizer(config);
    let total = total_steps(data.len(), config);
    let mut log = TrainingLog {
        kind: "ie".into(),
        config_hash: config.hash(),
        manifest_hash: data.manifest_hash.clone(),
        samples: data.len(),
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut step = 0;
    for epoch in 0..config.epochs {
        let order = epoch_order(data.len(), config.seed, epoch);
        let mut sums = [0.0; 4];
        let mut batches = 0;
        let lr0 = config.learning_rate_at(step, total);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let grids: Vec<_> = idx.iter().map(|&i| &data.grids[i]).collect();
            let samples: Vec<_> = idx
                .iter()
                .map(|&i| {
                    let seed = mix_seed(config.seed, epoch as u64, 1 + i as u64);
                    sample_coords(
                        &data.grids[i],
                        config.coord_samples,
                        config.sample_mode,
                        seed,
                    )
                })
                .collect();
            let grads = {
                let mut g = Graph::new(&model.store);
                let obj = guard(
                    model.objective(&mut g, &grids, &samples),
                    epoch,
                    batch,
                    "objective",
                )?;
                let parts = [obj.total, obj.occupancy, obj.grouping, obj.combining]
                    .map(|v| g.value(v).item());
                for (s, p) in sums.iter_mut().zip(parts) {
                    *s += p;
                }
                guard(g.backward(obj.total), epoch, batch, "backward")?
            };
            check_grads(&grads, epoch, batch)?;
            opt.config.lr = config.learning_rate_at(step, total);
            guard(opt.step(&mut model.store, &grads), epoch, batch, "update")?;
            step += 1;
            batches += 1;
        }
        let b = batches as f64;
        let entry = EpochLog {
            epoch,
            learning_rate: lr0,
            objective: sums[0] / b,
            occupancy: Some(sums[1] / b),
            grouping: Some(sums[2] / b),
            combining: Some(sums[3] / b),
        };
        on_epoch(&entry, &model);
        log.epochs.push(entry);
    }
    Ok((model, log))
}

/// Where regression targets come from.
pub enum CodeTargets<'a> {
    /// Encoded once up front.
    Cached(Vec<ShapeCode>),
    /// Re-encoded by the frozen model for every batch.
    OnTheFly(&'a ImplicitModel),
}

impl<'a> CodeTargets<'a> {
    pub fn new(ie: &'a ImplicitModel, data: &Prepared, cache: bool) -> Result<Self> {
        if cache {
            let grids: Vec<_> = data.grids.iter().collect();
            Ok(CodeTargets::Cached(ie.encode(&grids)?))
        } else {
            Ok(CodeTargets::OnTheFly(ie))
        }
    }

    fn get(&self, data: &Prepared, idx: &[usize]) -> Result<Vec<ShapeCode>> {
        match self {
            CodeTargets::Cached(codes) => Ok(idx.iter().map(|&i| codes[i].clone()).collect()),
            CodeTargets::OnTheFly(m) => {
                let grids: Vec<_> = idx.iter().map(|&i| &data.grids[i]).collect();
                m.encode(&grids)
            }
        }
    }
}

/// Trains the code regressor against frozen self-encoder codes.
pub fn train_sr(
    data: &Prepared,
    inputs: &[Vec<f64>],
    ie: &ImplicitModel,
    config: &TrainConfig,
    cache_codes: bool,
) -> Result<(CodeRegressor, TrainingLog)> {
    let reg = CodeRegressor::new(config.regressor_config(), config.seed)?;
    train_sr_from(data, inputs, ie, config, cache_codes, reg, |_, _| {})
}

pub fn train_sr_from(
    data: &Prepared,
    inputs: &[Vec<f64>],
    ie: &ImplicitModel,
    config: &TrainConfig,
    cache_codes: bool,
    mut reg: CodeRegressor,
    mut on_epoch: impl FnMut(&EpochLog, &CodeRegressor),
) -> Result<(CodeRegressor, TrainingLog)> {
    config.validate()?;
    if reg.config != config.regressor_config() {
        return Err(Error::Config(
            "initial regressor does not match the configured architecture".into(),
        ));
    }
    if ie.config.code_dim != reg.config.code_dim {
        return Err(Error::ShapeMismatch {
            op: "code dimension",
            left: vec![ie.config.code_dim],
            right: vec![reg.config.code_dim],
        });
    }
    if inputs.len() != data.len() {
        return Err(Error::ShapeMismatch {
            op: "regressor inputs",
            left: vec![inputs.len()],
            right: vec![data.len()],
        });
    }
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let targets = CodeTargets::new(ie, data, cache_codes)?;
    let mut opt = optimizer(config);
    let total = total_steps(data.len(), config);
    let mut log = TrainingLog {
        kind: "sr".into(),
        config_hash: config.hash(),
        manifest_hash: data.manifest_hash.clone(),
        samples: data.len(),
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut step = 0;
    for epoch in 0..config.epochs {
        let order = epoch_order(data.len(), config.seed, epoch);
        let mut sum = 0.0;
        let mut batches = 0;
        let lr0 = config.learning_rate_at(step, total);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let images: Vec<&[f64]> = idx.iter().map(|&i| inputs[i].as_slice()).collect();
            let codes = targets.get(data, idx)?;
            let grads = {
                let mut g = Graph::new(&reg.store);
                let loss = guard(
                    reg.loss(&mut g, &images, &codes),
                    epoch,
                    batch,
                    "regression",
                )?;
                sum += g.value(loss).item();
                guard(g.backward(loss), epoch, batch, "backward")?
            };
            check_grads(&grads, epoch, batch)?;
            opt.config.lr = config.learning_rate_at(step, total);
            guard(opt.step(&mut reg.store, &grads), epoch, batch, "update")?;
            step += 1;
            batches += 1;
        }
        let entry = EpochLog {
            epoch,
            learning_rate: lr0,
            objective: sum / batches as f64,
            occupancy: None,
            grouping: None,
            combining: None,
        };
        on_epoch(&entry, &reg);
        log.epochs.push(entry);
    }
    Ok((reg, log))
}
