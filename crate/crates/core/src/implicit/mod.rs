//! Implicit layout encoding.
//!
//! A self-encoder maps an occupancy grid to a shape code in `(0, 1)^D`; a
//! generator turns the code into `N_p` hyperplanes; the renderer groups
//! half-planes into `N_s` convex primitives with `W_g` and merges them with
//! `W_c`. A separate regressor predicts the code from other inputs.

pub mod config;
pub mod encoder;
pub mod generator;
pub mod loss;
pub mod model;
pub mod regressor;
pub mod render;

pub use config::{EncoderHead, ModelConfig};
pub use encoder::Encoder;
pub use generator::{manhattan_planes, PlaneGenerator};
pub use loss::{
    combining_loss, combining_value, grouping_loss, grouping_value, occupancy_loss, occupancy_sum,
    total_objective, Objective,
};
pub use model::{stack_samples, ImplicitModel};
pub use regressor::{CodeRegressor, RegressionLoss, RegressorConfig};
pub use render::{
    coords_tensor, render, render_graph, HyperplaneSet, RenderOutput, RenderVars, ShapeCode,
};
