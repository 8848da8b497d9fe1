use serde::{Deserialize, Serialize};

/// Head of a convolutional encoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderHead {
    /// Global average pooling before the final dense layer.
    #[default]
    Gap,
    /// Flatten the last feature map into the final dense layer.
    Fc,
}

/// Architecture of the self-encoder, hyperplane generator and renderer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Occupancy grid side length `R`.
    pub resolution: usize,
    /// Number of hyperplanes `N_p`.
    pub n_planes: usize,
    /// Number of convex primitives `N_s`.
    pub n_primitives: usize,
    /// Shape-code dimension `D`.
    pub code_dim: usize,
    /// Output channels of the stride-2 convolutions.
    pub encoder_channels: Vec<usize>,
    pub head: EncoderHead,
    pub generator_hidden: Vec<usize>,
    pub manhattan: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            resolution: 64,
            n_planes: 128,
            n_primitives: 16,
            code_dim: 128,
            encoder_channels: vec![16, 32, 64, 128, 256],
            head: EncoderHead::Gap,
            generator_hidden: vec![256, 512],
            manhattan: false,
        }
    }
}

impl ModelConfig {
    /// The tiny configuration used for gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            resolution: 16,
            n_planes: 8,
            n_primitives: 2,
            code_dim: 8,
            encoder_channels: vec![4, 8],
            head: EncoderHead::Gap,
            generator_hidden: vec![16, 16],
            manhattan: false,
        }
    }

    /// `(N_p, N_s)` presets: 64/8, 128/16, 256/32.
    pub fn with_size(mut self, n_planes: usize, n_primitives: usize) -> Self {
        self.n_planes = n_planes;
        self.n_primitives = n_primitives;
        self
    }
}
