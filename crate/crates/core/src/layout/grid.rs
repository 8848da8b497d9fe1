//! Top-view occupancy rasters.
//!
//! Normalized coordinates span `[-1, 1]^2` over the grid. Pixel `(i, j)` (row,
//! column) has its center at `((j + 0.5) * 2/R - 1, 1 - (i + 0.5) * 2/R)`, so
//! row 0 is the `+y` edge.

use serde::{Deserialize, Serialize};

use super::geometry::{bounding_box, point_in_polygon, Point};
use super::room::{RoomLayout, MIN_AREA};
use crate::{Error, Result};

/// Smallest supported grid resolution.
pub const MIN_RESOLUTION: usize = 8;

/// Mapping between layout meters and normalized grid coordinates:
/// `normalized = (world - center) / meters_per_unit`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub center: Point,
    pub meters_per_unit: f64,
}

impl GridFrame {
    pub fn to_normalized(&self, p: Point) -> Point {
        p.sub(self.center).scale(1.0 / self.meters_per_unit)
    }

    pub fn to_world(&self, q: Point) -> Point {
        q.scale(self.meters_per_unit).add(self.center)
    }
}

/// How a layout is placed on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitPolicy {
    /// Center the bounding box and scale (aspect preserved) so its longer side
    /// spans `[-half_extent, half_extent]`.
    Margin { half_extent: f64 },
    /// Use a fixed frame.
    Explicit(GridFrame),
}

impl Default for FitPolicy {
    fn default() -> Self {
        FitPolicy::Margin { half_extent: 0.9 }
    }
}

impl FitPolicy {
    pub fn frame_for(&self, corners: &[Point]) -> GridFrame {
        match *self {
            FitPolicy::Explicit(frame) => frame,
            FitPolicy::Margin { half_extent } => {
                let (lo, hi) = bounding_box(corners);
                let center = lo.add(hi).scale(0.5);
                let half = 0.5 * (hi.x - lo.x).max(hi.y - lo.y);
                GridFrame {
                    center,
                    meters_per_unit: half / half_extent,
                }
            }
        }
    }
}

/// Normalized center of pixel `(row, col)` on an `R x R` grid.
pub fn pixel_center(resolution: usize, row: usize, col: usize) -> Point {
    let step = 2.0 / resolution as f64;
    Point::new(
        (col as f64 + 0.5) * step - 1.0,
        1.0 - (row as f64 + 0.5) * step,
    )
}

/// Binary `R x R` top-view raster; `1` marks in-room pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    resolution: usize,
    frame: Option<GridFrame>,
    values: Vec<u8>,
}

impl OccupancyGrid {
    pub fn from_values(
        resolution: usize,
        values: Vec<u8>,
        frame: Option<GridFrame>,
    ) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidLayout(format!(
                "grid resolution {resolution} below minimum {MIN_RESOLUTION}"
            )));
        }
        if values.len() != resolution * resolution {
            return Err(Error::ShapeMismatch {
                op: "occupancy grid",
                left: vec![resolution, resolution],
                right: vec![values.len()],
            });
        }
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidLayout(format!(
                "grid value {bad} is not 0 or 1"
            )));
        }
        Ok(OccupancyGrid {
            resolution,
            frame,
            values,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Placement of the source layout, when the grid came from [`rasterize`].
    pub fn frame(&self) -> Option<GridFrame> {
        self.frame
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.resolution + col]
    }

    pub fn occupied(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Bilinear interpolation over pixel centers, clamped to the border.
    pub fn bilinear(&self, p: Point) -> f64 {
        let r = self.resolution;
        let rf = r as f64;
        let max = (r - 1) as f64;
        // pixel centers round-trip through this mapping only up to a few ulps;
        // snap them so node values come back exactly
        let snap = |t: f64| {
            let n = t.round();
            if (t - n).abs() <= 1e-12 * rf {
                n
            } else {
                t
            }
        };
        let col = snap((p.x + 1.0) * 0.5 * rf - 0.5).clamp(0.0, max);
        let row = snap((1.0 - p.y) * 0.5 * rf - 0.5).clamp(0.0, max);
        let c0 = col.floor() as usize;
        let r0 = row.floor() as usize;
        let c1 = (c0 + 1).min(r - 1);
        let r1 = (r0 + 1).min(r - 1);
        let tc = col - c0 as f64;
        let tr = row - r0 as f64;
        let v = |i: usize, j: usize| self.values[i * r + j] as f64;
        let top = v(r0, c0) * (1.0 - tc) + v(r0, c1) * tc;
        let bottom = v(r1, c0) * (1.0 - tc) + v(r1, c1) * tc;
        top * (1.0 - tr) + bottom * tr
    }
}

/// Rasterizes a layout: a pixel is `1` iff its center lies inside the polygon.
pub fn rasterize(layout: &RoomLayout, resolution: usize, fit: FitPolicy) -> Result<OccupancyGrid> {
    if layout.area().abs() < MIN_AREA {
        return Err(Error::InvalidLayout(format!(
            "{}: degenerate polygon",
            layout.id
        )));
    }
    layout.validate()?;
    let frame = fit.frame_for(&layout.corners);
    if !(frame.meters_per_unit > 0.0 && frame.meters_per_unit.is_finite()) {
        return Err(Error::InvalidLayout(format!(
            "{}: bad grid frame",
            layout.id
        )));
    }
    let normalized: Vec<Point> = layout
        .corners
        .iter()
        .map(|&p| frame.to_normalized(p))
        .collect();
    let mut values = vec![0u8; resolution * resolution];
    for row in 0..resolution {
        for col in 0..resolution {
            if point_in_polygon(pixel_center(resolution, row, col), &normalized) {
                values[row * resolution + col] = 1;
            }
        }
    }
    OccupancyGrid::from_values(resolution, values, Some(frame))
}
