//! Parametric room-layout encoding.
//!
//! Room layouts are rasterized into top-view occupancy grids, self-encoded into
//! a bounded latent shape code, decoded into a set of 2D hyperplanes and rendered
//! back into occupancy values through a differentiable grouping/combining
//! renderer. A second network regresses the shape code from equirectangular
//! semantic boundary maps, which turns the decoder into an end-to-end layout
//! estimator.
//!
//! Module map:
//!
//! - [`layout`]: polygons, rasterization, coordinate sampling, IoU, contours, file I/O.
//! - [`roomgen`]: rectilinear anchor rooms and conditional uniform wall augmentation.
//! - [`diffnet`]: a small tensor-level reverse-mode autodiff core with Adam.
//! - [`implicit`]: self-encoder, hyperplane generator, occupancy renderer, losses, code regressor.
//! - [`panorama`]: analytic visible boundary maps in equirectangular projection.
//! - [`harness`]: configs, training loops, evaluation reports and checkpoints.

pub mod diffnet;
pub mod error;
pub mod harness;
pub mod implicit;
pub mod layout;
pub mod panorama;
pub mod roomgen;

pub use error::{Error, Result};
pub use layout::{
    compute_iou, point_in_polygon, rasterize, sample_coords, Camera, CoordBatch, FitPolicy,
    GridFrame, IoUReport, OccupancyGrid, Point, RoomLayout, SampleMode,
};
