use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::implicit::{EncoderHead, ModelConfig, RegressionLoss, RegressorConfig};
use crate::layout::SampleMode;
use crate::{Error, Result};

/// What the code regressor sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorInput {
    /// Three-channel panorama boundary maps.
    #[default]
    BoundaryMap,
    /// The top-view occupancy grid itself.
    OccupancyGrid,
}

/// Experiment configuration shared by training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub resolution: usize,
    pub code_dim: usize,
    pub n_planes: usize,
    pub n_primitives: usize,
    pub encoder_mode: EncoderHead,
    pub encoder_channels: Vec<usize>,
    pub generator_hidden: Vec<usize>,
    pub manhattan: bool,
    pub regression_loss: RegressionLoss,
    pub regressor_input: RegressorInput,
    /// Query coordinates per sample per step.
    pub coord_samples: usize,
    pub sample_mode: SampleMode,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial one (cosine schedule); 1 keeps it constant.
    pub final_lr_fraction: f64,
    pub epochs: usize,
    pub seed: u64,
    pub sigma_px: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainConfig {
            resolution: m.resolution,
            code_dim: m.code_dim,
            n_planes: m.n_planes,
            n_primitives: m.n_primitives,
            encoder_mode: m.head,
            encoder_channels: m.encoder_channels,
            generator_hidden: m.generator_hidden,
            manhattan: m.manhattan,
            regression_loss: RegressionLoss::L2,
            regressor_input: RegressorInput::BoundaryMap,
            coord_samples: 1024,
            sample_mode: SampleMode::BoundaryBiased,
            batch_size: 16,
            learning_rate: 1e-4,
            final_lr_fraction: 1.0,
            epochs: 100,
            seed: 0,
            sigma_px: crate::panorama::DEFAULT_SIGMA_PX,
            image_width: 128,
            image_height: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("resolution", self.resolution),
            ("code_dim", self.code_dim),
            ("n_planes", self.n_planes),
            ("n_primitives", self.n_primitives),
            ("coord_samples", self.coord_samples),
            ("batch_size", self.batch_size),
            ("image_width", self.image_width),
            ("image_height", self.image_height),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.resolution < 8 {
            return Err(Error::Config("resolution must be at least 8".into()));
        }
        if self.encoder_channels.is_empty() || self.encoder_channels.contains(&0) {
            return Err(Error::Config(
                "encoder_channels must be non-empty and positive".into(),
            ));
        }
        if self.generator_hidden.contains(&0) {
            return Err(Error::Config(
                "generator_hidden widths must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::Config("final_lr_fraction must be in (0, 1]".into()));
        }
        if !(self.sigma_px > 0.0 && self.sigma_px.is_finite()) {
            return Err(Error::Config("sigma_px must be positive".into()));
        }
        if self.image_width != 2 * self.image_height {
            return Err(Error::Config(
                "image_width must be twice image_height".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: TrainConfig = serde_json::from_str(text)
            .map_err(|e| Error::parse("config JSON", e.line(), e.column(), e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("config serializes"),
        ))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            resolution: self.resolution,
            n_planes: self.n_planes,
            n_primitives: self.n_primitives,
            code_dim: self.code_dim,
            encoder_channels: self.encoder_channels.clone(),
            head: self.encoder_mode,
            generator_hidden: self.generator_hidden.clone(),
            manhattan: self.manhattan,
        }
    }

    pub fn regressor_config(&self) -> RegressorConfig {
        let (in_channels, height, width) = match self.regressor_input {
            RegressorInput::BoundaryMap => (3, self.image_height, self.image_width),
            RegressorInput::OccupancyGrid => (1, self.resolution, self.resolution),
        };
        RegressorConfig {
            in_channels,
            height,
            width,
            code_dim: self.code_dim,
            encoder_channels: self.encoder_channels.clone(),
            head: self.encoder_mode,
            loss: self.regression_loss,
        }
    }

    /// Cosine-annealed learning rate at `step` of `total`.
    pub fn learning_rate_at(&self, step: usize, total: usize) -> f64 {
        if total <= 1 || self.final_lr_fraction >= 1.0 {
            return self.learning_rate;
        }
        let t = step as f64 / (total - 1) as f64;
        let f = self.final_lr_fraction
            + (1.0 - self.final_lr_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.learning_rate * f
    }
}
