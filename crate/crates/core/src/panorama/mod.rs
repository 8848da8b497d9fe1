//! Analytic visible boundary maps in equirectangular projection.
//!
//! Column `u` of a `W x H` panorama looks along azimuth
//! `((u + 0.5) / W) 2 pi - pi`; elevation `phi` maps to the continuous row
//! `(0.5 - phi / pi) H`, so the horizon is the line between rows `H/2 - 1` and
//! `H/2`. Each column casts a horizontal ray from the camera; the nearest wall
//! hit gives the floor and ceiling boundary rows. Wall-wall boundaries are
//! vertical segments at column edges where the visible wall changes.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::layout::geometry::{point_segment_distance, ray_segment};
use crate::layout::io::{decode_pgm, encode_pgm, GrayImage};
use crate::layout::{Point, RoomLayout};
use crate::{Error, Result};

pub const CHANNELS: usize = 3;
pub const WALL_FLOOR: usize = 0;
pub const WALL_CEILING: usize = 1;
pub const WALL_WALL: usize = 2;
pub const DEFAULT_SIGMA_PX: f64 = 1.5;
/// Gaussian splats are truncated beyond this many sigmas.
const SPLAT_REACH: f64 = 4.0;

/// Three-channel boundary image, channel-major: wall-floor, wall-ceiling, wall-wall.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl BoundaryMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        BoundaryMap {
            width,
            height,
            data: vec![0.0; CHANNELS * width * height],
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }
}

pub fn column_azimuth(u: usize, width: usize) -> f64 {
    (u as f64 + 0.5) / width as f64 * 2.0 * PI - PI
}

/// Continuous row of elevation `phi`.
pub fn elevation_row(phi: f64, height: usize) -> f64 {
    (0.5 - phi / PI) * height as f64
}

/// Nearest wall hit by the horizontal ray from the camera: `(distance, wall index)`.
/// Exact ties go to the lower wall index.
pub fn cast_column(layout: &RoomLayout, azimuth: f64) -> Result<(f64, usize)> {
    let origin = layout.camera.position();
    let dir = Point::new(azimuth.cos(), azimuth.sin());
    let n = layout.corners.len();
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let (a, b) = (layout.corners[i], layout.corners[(i + 1) % n]);
        if let Some(t) = ray_segment(origin, dir, a, b) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best.ok_or_else(|| {
        Error::Internal(format!(
            "{}: ray at azimuth {azimuth} hits no wall",
            layout.id
        ))
    })
}

/// Per-column ray result and boundary rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnSample {
    pub azimuth: f64,
    pub distance: f64,
    pub wall: usize,
    pub floor_row: f64,
    pub ceiling_row: f64,
}

pub fn column_samples(
    layout: &RoomLayout,
    width: usize,
    height: usize,
) -> Result<Vec<ColumnSample>> {
    layout.validate()?;
    let h = layout.camera.height;
    let up = layout.ceiling_height - h;
    (0..width)
        .map(|u| {
            let azimuth = column_azimuth(u, width);
            let (d, wall) = cast_column(layout, azimuth)?;
            Ok(ColumnSample {
                azimuth,
                distance: d,
                wall,
                floor_row: elevation_row((-h / d).atan(), height),
                ceiling_row: elevation_row((up / d).atan(), height),
            })
        })
        .collect()
}

/// Column edges `x` (between columns `x - 1` and `x`, cyclic) where the visible wall changes.
pub fn wall_change_edges(samples: &[ColumnSample]) -> Vec<usize> {
    let w = samples.len();
    (0..w)
        .filter(|&x| samples[(x + w - 1) % w].wall != samples[x].wall)
        .collect()
}

type Segment = (Point, Point);

fn walls_adjacent(a: usize, b: usize, n: usize) -> bool {
    a == b || (a + 1) % n == b || (b + 1) % n == a
}

fn boundary_segments(
    samples: &[ColumnSample],
    walls: usize,
    row: impl Fn(&ColumnSample) -> f64,
) -> Vec<Segment> {
    let w = samples.len();
    let mut segs = Vec::with_capacity(w);
    for u in 0..w {
        let (s0, s1) = (&samples[u], &samples[(u + 1) % w]);
        let p0 = Point::new(u as f64 + 0.5, row(s0));
        if walls_adjacent(s0.wall, s1.wall, walls) {
            // the last segment wraps past the right image edge
            segs.push((p0, Point::new(u as f64 + 1.5, row(s1))));
        } else {
            segs.push((p0, p0));
        }
    }
    segs
}

fn vertical_segments(samples: &[ColumnSample]) -> Vec<Segment> {
    let w = samples.len();
    wall_change_edges(samples)
        .into_iter()
        .map(|x| {
            let (a, b) = (&samples[(x + w - 1) % w], &samples[x]);
            let top = a.ceiling_row.min(b.ceiling_row);
            let bottom = a.floor_row.max(b.floor_row);
            (Point::new(x as f64, top), Point::new(x as f64, bottom))
        })
        .collect()
}

/// Peak-normalized Gaussian splat of segments over a horizontally cyclic image.
fn splat(segments: &[Segment], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; width * height];
    let reach = SPLAT_REACH * sigma;
    let wf = width as f64;
    for &(a, b) in segments {
        for shift in [-wf, 0.0, wf] {
            let (a, b) = (Point::new(a.x + shift, a.y), Point::new(b.x + shift, b.y));
            let x0 = (a.x.min(b.x) - reach).floor().max(0.0) as usize;
            let x1 = ((a.x.max(b.x) + reach).ceil().max(0.0) as usize).min(width);
            let y0 = (a.y.min(b.y) - reach).floor().max(0.0) as usize;
            let y1 = ((a.y.max(b.y) + reach).ceil().max(0.0) as usize).min(height);
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                    let d = point_segment_distance(p, a, b);
                    let slot = &mut dist[y * width + x];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    let mut out: Vec<f64> = dist
        .iter()
        .map(|&d| {
            if d <= reach {
                (-d * d / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let peak = out.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    out
}

/// Renders the visible wall-floor, wall-ceiling and wall-wall boundaries.
pub fn render_boundaries(
    layout: &RoomLayout,
    width: usize,
    height: usize,
    sigma_px: f64,
) -> Result<BoundaryMap> {
    if width != 2 * height || height == 0 {
        return Err(Error::Config(format!(
            "panorama must be 2:1, got {width}x{height}"
        )));
    }
    if !(sigma_px > 0.0 && sigma_px.is_finite()) {
        return Err(Error::Config(format!(
            "sigma_px must be positive, got {sigma_px}"
        )));
    }
    let samples = column_samples(layout, width, height)?;
    let n = layout.corners.len();
    let channels = [
        boundary_segments(&samples, n, |s| s.floor_row),
        boundary_segments(&samples, n, |s| s.ceiling_row),
        vertical_segments(&samples),
    ];
    let planes: Vec<Vec<f64>> = channels
        .par_iter()
        .map(|segs| splat(segs, width, height, sigma_px))
        .collect();
    Ok(BoundaryMap {
        width,
        height,
        data: planes.concat(),
    })
}

/// One P5 image of `W x 3H`, channels stacked vertically, values `round(255 v)`.
pub fn encode_boundary_map(map: &BoundaryMap) -> Vec<u8> {
    let pixels = map
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    encode_pgm(&GrayImage {
        width: map.width,
        height: CHANNELS * map.height,
        pixels,
    })
}

pub fn decode_boundary_map(bytes: &[u8]) -> Result<BoundaryMap> {
    let img = decode_pgm(bytes)?;
    if img.height % CHANNELS != 0 {
        return Err(Error::parse(
            "boundary map",
            2,
            0,
            format!("height {} is not a multiple of 3", img.height),
        ));
    }
    Ok(BoundaryMap {
        width: img.width,
        height: img.height / CHANNELS,
        data: img.pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    })
}

pub fn boundary_map_file_name(layout_id: &str) -> String {
    format!("{layout_id}.sbm.pgm")
}

pub fn write_boundary_map(path: &Path, map: &BoundaryMap) -> Result<()> {
    fs::write(path, encode_boundary_map(map)).map_err(|e| Error::io(path, e))
}

pub fn read_boundary_map(path: &Path) -> Result<BoundaryMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_boundary_map(&bytes)
}
