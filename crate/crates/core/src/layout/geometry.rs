//! Planar polygon primitives used by rasterization, room generation and the
//! panorama ray caster.

use serde::{Deserialize, Serialize};

/// Tolerance for treating a point as lying on a polygon edge.
const EDGE_EPS: f64 = 1e-12;

/// A 2D point in meters (layout space) or normalized units (grid space).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

// named vector ops read better than operator overloads in the geometry code
#[allow(clippy::should_implement_trait)]
impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    /// Rotates counter-clockwise about the origin.
    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Shoelace signed area; positive for counter-clockwise polygons.
pub fn signed_area(corners: &[Point]) -> f64 {
    let n = corners.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = corners[i];
        let b = corners[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Axis-aligned bounding box as `(min, max)`.
pub fn bounding_box(corners: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in corners {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Edge lengths, edge `i` running from corner `i` to corner `i + 1`.
pub fn edge_lengths(corners: &[Point]) -> Vec<f64> {
    let n = corners.len();
    (0..n)
        .map(|i| corners[i].dist(corners[(i + 1) % n]))
        .collect()
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let ab = b.sub(a);
    let ap = p.sub(a);
    let scale = ab.norm().max(1.0);
    if ab.cross(ap).abs() > EDGE_EPS * scale * scale {
        return false;
    }
    let t = ap.dot(ab);
    t >= -EDGE_EPS && t <= ab.dot(ab) + EDGE_EPS
}

/// Even-odd point-in-polygon test. Points on an edge count as inside.
pub fn point_in_polygon(p: Point, corners: &[Point]) -> bool {
    let n = corners.len();
    let mut inside = false;
    for i in 0..n {
        let a = corners[i];
        let b = corners[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// Closed-segment intersection test, including touching and collinear overlap.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// True when no two non-adjacent edges touch and adjacent edges share only
/// their common corner.
pub fn is_simple(corners: &[Point]) -> bool {
    let n = corners.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a1 = corners[i];
        let a2 = corners[(i + 1) % n];
        if a1 == a2 {
            return false;
        }
        for j in (i + 1)..n {
            let b1 = corners[j];
            let b2 = corners[(j + 1) % n];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges may only meet at the shared corner: reject folds back.
                let (shared, other_a, other_b) = if j == i + 1 {
                    (a2, a1, b2)
                } else {
                    (a1, a2, b1)
                };
                let u = other_a.sub(shared);
                let v = other_b.sub(shared);
                if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                    return false;
                }
            } else if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Distance along a ray `origin + t * dir` (t > 0) to segment `a`-`b`, if hit.
pub fn ray_segment(origin: Point, dir: Point, a: Point, b: Point) -> Option<f64> {
    let e = b.sub(a);
    let denom = dir.cross(e);
    if denom == 0.0 {
        return None;
    }
    let w = a.sub(origin);
    let t = w.cross(e) / denom;
    let s = w.cross(dir) / denom;
    if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Smallest distance from `p` to any edge of the polygon.
pub fn distance_to_boundary(p: Point, corners: &[Point]) -> f64 {
    let n = corners.len();
    (0..n)
        .map(|i| point_segment_distance(p, corners[i], corners[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}
