//! Rectilinear anchor rooms built by cutting staircase notches into the
//! corners of a rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::geometry::{distance_to_boundary, point_in_polygon, Point};
use crate::layout::{Camera, RoomLayout};
use crate::{Error, Result};

/// Minimum wall length of generated anchors, meters.
pub const MIN_WALL: f64 = 0.5;
/// Minimum camera clearance from any wall, meters.
pub const CAMERA_CLEARANCE: f64 = 0.3;
const MAX_ATTEMPTS: usize = 1000;
const CAMERA_CANDIDATES: usize = 8;

pub const SUPPORTED_WALLS: [usize; 4] = [4, 6, 8, 10];

/// Side length range of the enclosing rectangle, meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeRange {
    pub min: f64,
    pub max: f64,
}

impl Default for SizeRange {
    fn default() -> Self {
        SizeRange { min: 3.0, max: 8.0 }
    }
}

/// `m` strictly increasing values in `[MIN_WALL, budget]` with gaps of at least `MIN_WALL`.
fn spaced_values(rng: &mut ChaCha8Rng, m: usize, budget: f64) -> Option<Vec<f64>> {
    let slack = budget - MIN_WALL * m as f64;
    if slack < 0.0 {
        return None;
    }
    let mut s: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..=slack)).collect();
    s.sort_by(f64::total_cmp);
    Some(
        s.iter()
            .enumerate()
            .map(|(k, v)| MIN_WALL * (k + 1) as f64 + v)
            .collect(),
    )
}

fn try_build(rng: &mut ChaCha8Rng, walls: usize, size: SizeRange) -> Option<Vec<Point>> {
    let w = rng.random_range(size.min..=size.max);
    let h = rng.random_range(size.min..=size.max);
    // (corner, incoming direction, outgoing direction, incoming length, outgoing length), CCW
    let corners = [
        (
            Point::new(0.0, 0.0),
            Point::new(0.0, -1.0),
            Point::new(1.0, 0.0),
            h,
            w,
        ),
        (
            Point::new(w, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            w,
            h,
        ),
        (
            Point::new(w, h),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
            h,
            w,
        ),
        (
            Point::new(0.0, h),
            Point::new(-1.0, 0.0),
            Point::new(0.0, -1.0),
            w,
            h,
        ),
    ];
    let mut steps = [0usize; 4];
    for _ in 0..(walls - 4) / 2 {
        steps[rng.random_range(0..4)] += 1;
    }
    let mut poly = Vec::with_capacity(walls);
    for (k, &(p, d_in, d_out, l_in, l_out)) in corners.iter().enumerate() {
        let m = steps[k];
        if m == 0 {
            poly.push(p);
            continue;
        }
        // Each corner may use up to half of both adjacent rectangle edges.
        let a = spaced_values(rng, m, 0.5 * (l_in - MIN_WALL))?;
        let b = spaced_values(rng, m, 0.5 * (l_out - MIN_WALL))?;
        // a is walked from the deepest inset (largest) to the shallowest.
        for s in 0..m {
            let a_s = a[m - 1 - s];
            let b_prev = if s == 0 { 0.0 } else { b[s - 1] };
            poly.push(p.sub(d_in.scale(a_s)).add(d_out.scale(b_prev)));
            poly.push(p.sub(d_in.scale(a_s)).add(d_out.scale(b[s])));
        }
        poly.push(p.add(d_out.scale(b[m - 1])));
    }
    Some(poly)
}

/// Picks the most central of a few random interior candidates.
fn place_camera(rng: &mut ChaCha8Rng, corners: &[Point], w: f64, h: f64) -> Option<Point> {
    let mut best: Option<(f64, Point)> = None;
    let mut tries = 0;
    let mut found = 0;
    while found < CAMERA_CANDIDATES && tries < 200 {
        tries += 1;
        let c = Point::new(rng.random_range(0.0..=w), rng.random_range(0.0..=h));
        if !point_in_polygon(c, corners) {
            continue;
        }
        let clearance = distance_to_boundary(c, corners);
        if clearance < CAMERA_CLEARANCE {
            continue;
        }
        found += 1;
        if best.is_none_or(|(d, _)| clearance > d) {
            best = Some((clearance, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Generates a simple rectilinear room with `walls` walls.
pub fn generate_anchor(seed: u64, walls: usize, size: SizeRange) -> Result<RoomLayout> {
    if !SUPPORTED_WALLS.contains(&walls) {
        return Err(Error::Generation(format!(
            "unsupported wall count {walls}, expected one of {SUPPORTED_WALLS:?}"
        )));
    }
    if !(size.min >= 2.0 * MIN_WALL && size.max >= size.min) {
        return Err(Error::Generation(format!("bad size range {size:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let Some(corners) = try_build(&mut rng, walls, size) else {
            continue;
        };
        let (w, h) = {
            let (lo, hi) = crate::layout::geometry::bounding_box(&corners);
            (hi.x - lo.x, hi.y - lo.y)
        };
        let Some(cam) = place_camera(&mut rng, &corners, w, h) else {
            continue;
        };
        let ceiling = rng.random_range(2.4..=3.2);
        let cam_height = rng.random_range(1.2..=1.8_f64.min(ceiling - 0.3));
        let layout = RoomLayout {
            id: format!("anchor-{seed:016x}"),
            corners,
            ceiling_height: ceiling,
            camera: Camera {
                x: cam.x,
                y: cam.y,
                height: cam_height,
            },
        };
        if layout.validate().is_ok() {
            return Ok(layout);
        }
    }
    Err(Error::Generation(format!(
        "no valid {walls}-wall room after {MAX_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::geometry::{edge_lengths, is_simple, signed_area};

    #[test]
    fn four_walls_is_axis_aligned_rectangle() {
        let r = generate_anchor(1, 4, SizeRange::default()).unwrap();
        assert_eq!(r.corners.len(), 4);
        let c = &r.corners;
        assert_eq!(c[0].y, c[1].y);
        assert_eq!(c[1].x, c[2].x);
        assert_eq!(c[2].y, c[3].y);
        assert_eq!(c[3].x, c[0].x);
    }

    #[test]
    fn requested_walls_and_invariants() {
        for seed in 0..200 {
            for walls in SUPPORTED_WALLS {
                let r = generate_anchor(seed, walls, SizeRange::default()).unwrap();
                assert_eq!(r.corners.len(), walls);
                assert!(signed_area(&r.corners) > 0.0);
                assert!(is_simple(&r.corners));
                assert!(edge_lengths(&r.corners)
                    .iter()
                    .all(|&l| l >= MIN_WALL - 1e-12));
                assert!((2.4..=3.2).contains(&r.ceiling_height));
                // rectilinear: every edge is axis-aligned
                let n = r.corners.len();
                for i in 0..n {
                    let d = r.corners[(i + 1) % n].sub(r.corners[i]);
                    assert!(d.x == 0.0 || d.y == 0.0);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_anchor(42, 8, SizeRange::default()).unwrap();
        let b = generate_anchor(42, 8, SizeRange::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_odd_walls() {
        assert!(matches!(
            generate_anchor(0, 5, SizeRange::default()),
            Err(Error::Generation(_))
        ));
    }
}
