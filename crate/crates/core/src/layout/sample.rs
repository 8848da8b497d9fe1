use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Point;
use super::grid::{pixel_center, OccupancyGrid};

/// Homogeneous query coordinates, stored as a `3 x N` row-major block:
/// row 0 is `x`, row 1 is `y`, row 2 is all ones.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordBatch {
    data: Vec<f64>,
    count: usize,
}

impl CoordBatch {
    pub fn from_points(points: &[Point]) -> Self {
        let n = points.len();
        let mut data = vec![1.0; 3 * n];
        for (k, p) in points.iter().enumerate() {
            data[k] = p.x;
            data[n + k] = p.y;
        }
        CoordBatch { data, count: n }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The `3 x N` homogeneous block.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, k: usize) -> Point {
        Point::new(self.data[k], self.data[self.count + k])
    }

    /// All `R^2` pixel centers in row-major order.
    pub fn pixel_centers(resolution: usize) -> Self {
        let pts: Vec<Point> = (0..resolution * resolution)
            .map(|k| pixel_center(resolution, k / resolution, k % resolution))
            .collect();
        Self::from_points(&pts)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    UniformRandom,
    PixelCenters,
    /// Half of the samples land within three pixels of the in/out boundary.
    #[default]
    BoundaryBiased,
}

/// Pixels with a 4-neighbour of different value.
fn boundary_pixels(grid: &OccupancyGrid) -> Vec<(usize, usize)> {
    let r = grid.resolution();
    let mut out = Vec::new();
    for i in 0..r {
        for j in 0..r {
            let v = grid.get(i, j);
            let differs = (i > 0 && grid.get(i - 1, j) != v)
                || (i + 1 < r && grid.get(i + 1, j) != v)
                || (j > 0 && grid.get(i, j - 1) != v)
                || (j + 1 < r && grid.get(i, j + 1) != v);
            if differs {
                out.push((i, j));
            }
        }
    }
    out
}

/// Draws query coordinates and their bilinear ground truth.
///
/// `PixelCenters` ignores `n` and returns every center.
pub fn sample_coords(
    grid: &OccupancyGrid,
    n: usize,
    mode: SampleMode,
    seed: u64,
) -> (CoordBatch, Vec<f64>) {
    let n = n.max(1);
    let points: Vec<Point> = match mode {
        SampleMode::PixelCenters => {
            let batch = CoordBatch::pixel_centers(grid.resolution());
            let truth = grid.as_f64();
            return (batch, truth);
        }
        SampleMode::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| Point::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                .collect()
        }
        SampleMode::BoundaryBiased => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edge = boundary_pixels(grid);
            let r = grid.resolution();
            let reach = 3.0 * 2.0 / r as f64;
            let near = if edge.is_empty() { 0 } else { n / 2 };
            let mut pts = Vec::with_capacity(n);
            for _ in 0..near {
                let (i, j) = edge[rng.random_range(0..edge.len())];
                let c = pixel_center(r, i, j);
                let dx: f64 = rng.random_range(-reach..=reach);
                let dy: f64 = rng.random_range(-reach..=reach);
                pts.push(Point::new(
                    (c.x + dx).clamp(-1.0, 1.0),
                    (c.y + dy).clamp(-1.0, 1.0),
                ));
            }
            while pts.len() < n {
                pts.push(Point::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                ));
            }
            pts
        }
    };
    let truth = points.iter().map(|&p| grid.bilinear(p)).collect();
    (CoordBatch::from_points(&points), truth)
}
