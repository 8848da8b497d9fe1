//! Layout geometry, rasterization, coordinate sampling, IoU, contours and file I/O.

pub mod contour;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod iou;
pub mod room;
pub mod sample;

pub use contour::extract_contour;
pub use geometry::{point_in_polygon, signed_area, Point};
pub use grid::{pixel_center, rasterize, FitPolicy, GridFrame, OccupancyGrid};
pub use iou::{compute_iou, threshold, IoUReport};
pub use room::{Camera, RoomLayout};
pub use sample::{sample_coords, CoordBatch, SampleMode};
