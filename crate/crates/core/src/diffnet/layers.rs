//! Dense and convolutional layers with Xavier-uniform initialization.

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::Result;

/// Uniform samples in `[-limit, limit]` with `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng>(
    rng: &mut R,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape, data).expect("finite samples")
}

/// `y = x W + b` with `W` of shape `[in, out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.add(
            format!("{name}.w"),
            xavier_uniform(rng, &[inputs, outputs], inputs, outputs),
        )?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[outputs]))?;
        Ok(Dense {
            w,
            b,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }
}

/// 3x3 convolution, `[B, C, H, W] -> [B, C_out, H', W']`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let shape = [out_channels, in_channels, 3, 3];
        let w = store.add(
            format!("{name}.w"),
            xavier_uniform(rng, &shape, in_channels * 9, out_channels * 9),
        )?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[out_channels]))?;
        Ok(Conv2d {
            w,
            b,
            stride,
            pad: 1,
        })
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        g.conv2d(x, w, b, self.stride, self.pad)
    }
}
