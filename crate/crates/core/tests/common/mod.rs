#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::prelude::*;
use roomlay_core::layout::geometry::is_simple;
use roomlay_core::{Camera, Point, RoomLayout};

/// Star-shaped polygon around the origin: sorted angles with jitter and
/// radii in `[r_min, r_max]`. The origin sees every corner, so a camera there
/// lies strictly inside.
pub fn star_corners(n: usize, jitter: &[f64], radii: &[f64]) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let a = (k as f64 + 0.4 * jitter[k]) / n as f64 * 2.0 * PI;
            Point::new(radii[k] * a.cos(), radii[k] * a.sin())
        })
        .collect()
}

pub fn star_room(n: usize, jitter: &[f64], radii: &[f64], cam_height: f64) -> RoomLayout {
    RoomLayout::new(
        "star",
        star_corners(n, jitter, radii),
        3.0,
        Camera {
            x: 0.0,
            y: 0.0,
            height: cam_height,
        },
    )
    .expect("star polygons are valid rooms")
}

/// Random star-shaped room with 3..=max_corners corners.
pub fn arb_star_room(max_corners: usize) -> impl Strategy<Value = RoomLayout> {
    (3..=max_corners)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(0.0..1.0f64, n),
                prop::collection::vec(0.8..5.0f64, n),
                0.3..2.7f64,
            )
        })
        .prop_filter("simple", |(n, j, r, _)| is_simple(&star_corners(*n, j, r)))
        .prop_map(|(n, j, r, h)| star_room(n, &j, &r, h))
}

/// Winding number of the closed polygon around `p`.
pub fn winding_number(p: Point, corners: &[Point]) -> i32 {
    let n = corners.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (corners[i], corners[(i + 1) % n]);
        let side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            w -= 1;
        }
    }
    w
}
