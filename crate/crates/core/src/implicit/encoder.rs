//! Convolutional encoder shared by the self-encoder and the code regressor.

use rand::Rng;

use super::config::EncoderHead;
use crate::diffnet::{Conv2d, Dense, Graph, ParamStore, Tensor, Var};
use crate::{Error, Result};

/// Stride-2 3x3 convolutions with ReLU, then a GAP or flatten head, a dense
/// layer and a Sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub convs: Vec<Conv2d>,
    pub head: EncoderHead,
    pub out: Dense,
}

fn halved(n: usize, times: usize) -> usize {
    (0..times).fold(n, |n, _| (n + 2 - 3) / 2 + 1)
}

impl Encoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: (usize, usize, usize),
        channels: &[usize],
        head: EncoderHead,
        code_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (in_channels, height, width) = input;
        if channels.is_empty() {
            return Err(Error::Config(
                "encoder needs at least one convolution".into(),
            ));
        }
        let mut convs = Vec::with_capacity(channels.len());
        let mut c = in_channels;
        for (i, &co) in channels.iter().enumerate() {
            convs.push(Conv2d::new(
                store,
                &format!("{prefix}.conv{i}"),
                c,
                co,
                2,
                rng,
            )?);
            c = co;
        }
        let features = match head {
            EncoderHead::Gap => c,
            EncoderHead::Fc => c * halved(height, channels.len()) * halved(width, channels.len()),
        };
        let out = Dense::new(store, &format!("{prefix}.head"), features, code_dim, rng)?;
        Ok(Encoder {
            in_channels,
            height,
            width,
            convs,
            head,
            out,
        })
    }

    pub fn code_dim(&self) -> usize {
        self.out.outputs
    }

    /// `[B, C, H, W]` images to `[B, D]` codes in `(0, 1)`.
    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let s = g.shape(x);
        if s.len() != 4 || s[1..] != [self.in_channels, self.height, self.width] {
            return Err(Error::ResolutionMismatch {
                expected: vec![self.in_channels, self.height, self.width],
                got: s.iter().skip(1).copied().collect(),
            });
        }
        let mut h = x;
        for conv in &self.convs {
            h = conv.forward(g, h)?;
            h = g.relu(h)?;
        }
        let feat = match self.head {
            EncoderHead::Gap => g.global_avg_pool(h)?,
            EncoderHead::Fc => g.flatten(h)?,
        };
        let z = self.out.forward(g, feat)?;
        g.sigmoid(z)
    }

    /// Stacks equally sized `C x H x W` images into a batch tensor.
    pub fn batch(&self, images: &[&[f64]]) -> Result<Tensor> {
        let len = self.in_channels * self.height * self.width;
        let mut data = Vec::with_capacity(images.len() * len);
        for img in images {
            if img.len() != len {
                return Err(Error::ResolutionMismatch {
                    expected: vec![self.in_channels, self.height, self.width],
                    got: vec![img.len()],
                });
            }
            data.extend_from_slice(img);
        }
        Tensor::new(
            &[images.len(), self.in_channels, self.height, self.width],
            data,
        )
    }
}
