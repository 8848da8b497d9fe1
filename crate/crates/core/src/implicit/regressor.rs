//! Code regressor: images to shape codes, supervised by frozen self-encoder codes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::EncoderHead;
use super::encoder::Encoder;
use super::render::ShapeCode;
use crate::diffnet::{Graph, ParamStore, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressionLoss {
    L1,
    #[default]
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorConfig {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub code_dim: usize,
    pub encoder_channels: Vec<usize>,
    pub head: EncoderHead,
    pub loss: RegressionLoss,
}

impl Default for RegressorConfig {
    /// Three-channel `64 x 128` boundary maps.
    fn default() -> Self {
        RegressorConfig {
            in_channels: 3,
            height: 64,
            width: 128,
            code_dim: 128,
            encoder_channels: vec![16, 32, 64, 128, 256],
            head: EncoderHead::Gap,
            loss: RegressionLoss::L2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CodeRegressor {
    pub config: RegressorConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
}

impl CodeRegressor {
    pub fn new(config: RegressorConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(
            &mut store,
            "ie",
            (config.in_channels, config.height, config.width),
            &config.encoder_channels,
            config.head,
            config.code_dim,
            &mut rng,
        )?;
        Ok(CodeRegressor {
            config,
            store,
            encoder,
        })
    }

    pub fn load_params(&mut self, store: ParamStore) -> Result<()> {
        let same = store.len() == self.store.len()
            && self.store.iter().all(|(id, p)| {
                let o = store.get(id);
                o.name == p.name && o.value.shape() == p.value.shape()
            });
        if !same {
            return Err(Error::Checkpoint(
                "regressor parameters do not match the architecture".into(),
            ));
        }
        self.store = store;
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph<'_>, images: &[&[f64]]) -> Result<Var> {
        let x = g.input(self.encoder.batch(images)?)?;
        self.encoder.forward(g, x)
    }

    /// Regression loss against target codes, averaged over batch and code entries.
    pub fn loss(&self, g: &mut Graph<'_>, images: &[&[f64]], targets: &[ShapeCode]) -> Result<Var> {
        let pred = self.forward(g, images)?;
        let d = self.config.code_dim;
        let data: Vec<f64> = targets
            .iter()
            .flat_map(|c| c.values.iter().copied())
            .collect();
        let t = g.input(Tensor::new(&[targets.len(), d], data)?)?;
        match self.config.loss {
            RegressionLoss::L1 => g.l1(pred, t),
            RegressionLoss::L2 => g.mse(pred, t),
        }
    }

    pub fn predict(&self, images: &[&[f64]]) -> Result<Vec<ShapeCode>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(8) {
            let mut g = Graph::new(&self.store);
            let z = self.forward(&mut g, chunk)?;
            out.extend(
                g.value(z)
                    .data()
                    .chunks(self.config.code_dim)
                    .map(|c| ShapeCode { values: c.to_vec() }),
            );
        }
        Ok(out)
    }
}
