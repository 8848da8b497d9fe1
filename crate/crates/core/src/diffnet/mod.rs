//! Minimal reverse-mode differentiation: tensors, parameters, a recording
//! tape, layers, Adam and finite-difference gradient checks. All values are
//! `f64`.

pub mod adam;
pub mod gradcheck;
pub mod graph;
mod kernels;
pub mod layers;
pub mod params;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport, ParamCheck};
pub use graph::{CustomOp, Gradients, Graph, Var};
pub use layers::{xavier_uniform, Conv2d, Dense};
pub use params::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
