//! Marching-squares iso-contours over a field sampled at pixel centers.

use super::geometry::Point;
use super::grid::pixel_center;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EdgeId {
    /// Between nodes (i, j) and (i, j + 1).
    H(usize, usize),
    /// Between nodes (i, j) and (i + 1, j).
    V(usize, usize),
}

/// Extracts the level set `field == threshold` of an `R x R` row-major field.
///
/// A node is inside when its value is `>= threshold`. Each contour is a closed
/// polyline in normalized coordinates (the closing segment is implicit); chains
/// that run into the grid border are closed end-to-start. Saddles are resolved
/// by the cell-center average, which makes the result identical for `f` and
/// `1 - f` at threshold 0.5.
pub fn extract_contour(field: &[f64], resolution: usize, threshold: f64) -> Vec<Vec<Point>> {
    let r = resolution;
    assert_eq!(field.len(), r * r, "field must be R x R");
    if r < 2 {
        return Vec::new();
    }
    let val = |i: usize, j: usize| field[i * r + j];
    let inside = |i: usize, j: usize| val(i, j) >= threshold;

    let idx = |e: EdgeId| match e {
        EdgeId::H(i, j) => i * (r - 1) + j,
        EdgeId::V(i, j) => r * (r - 1) + i * r + j,
    };
    let n_edges = 2 * r * (r - 1);
    let mut links: Vec<Vec<EdgeId>> = vec![Vec::new(); n_edges];
    let link = |a: EdgeId, b: EdgeId, links: &mut Vec<Vec<EdgeId>>| {
        links[idx(a)].push(b);
        links[idx(b)].push(a);
    };

    for i in 0..r - 1 {
        for j in 0..r - 1 {
            let tl = inside(i, j);
            let tr = inside(i, j + 1);
            let br = inside(i + 1, j + 1);
            let bl = inside(i + 1, j);
            let top = EdgeId::H(i, j);
            let right = EdgeId::V(i, j + 1);
            let bottom = EdgeId::H(i + 1, j);
            let left = EdgeId::V(i, j);
            let mut crossing = Vec::with_capacity(4);
            if tl != tr {
                crossing.push(top);
            }
            if tr != br {
                crossing.push(right);
            }
            if br != bl {
                crossing.push(bottom);
            }
            if bl != tl {
                crossing.push(left);
            }
            match crossing.len() {
                0 => {}
                2 => link(crossing[0], crossing[1], &mut links),
                4 => {
                    let center =
                        0.25 * (val(i, j) + val(i, j + 1) + val(i + 1, j + 1) + val(i + 1, j));
                    // Cut off the corners on the opposite side of the center.
                    let center_in = center >= threshold;
                    if tl != center_in {
                        link(left, top, &mut links);
                        link(right, bottom, &mut links);
                    } else {
                        link(top, right, &mut links);
                        link(bottom, left, &mut links);
                    }
                }
                _ => unreachable!("marching squares cell with odd crossings"),
            }
        }
    }

    let point_on = |e: EdgeId| -> Point {
        let ((i0, j0), (i1, j1)) = match e {
            EdgeId::H(i, j) => ((i, j), (i, j + 1)),
            EdgeId::V(i, j) => ((i, j), (i + 1, j)),
        };
        let a = val(i0, j0);
        let b = val(i1, j1);
        let t = ((threshold - a) / (b - a)).clamp(0.0, 1.0);
        let pa = pixel_center(r, i0, j0);
        let pb = pixel_center(r, i1, j1);
        pa.add(pb.sub(pa).scale(t))
    };

    let all_edges = (0..r)
        .flat_map(|i| (0..r - 1).map(move |j| EdgeId::H(i, j)))
        .chain((0..r - 1).flat_map(|i| (0..r).map(move |j| EdgeId::V(i, j))));
    let all_edges: Vec<EdgeId> = all_edges.collect();
    let mut visited = vec![false; n_edges];
    let mut contours = Vec::new();

    let walk = |start: EdgeId, visited: &mut Vec<bool>| -> Vec<Point> {
        let mut pts = vec![point_on(start)];
        visited[idx(start)] = true;
        let mut prev: Option<EdgeId> = None;
        let mut cur = start;
        loop {
            let next = links[idx(cur)]
                .iter()
                .copied()
                .find(|&e| Some(e) != prev && !visited[idx(e)]);
            match next {
                Some(e) => {
                    visited[idx(e)] = true;
                    pts.push(point_on(e));
                    prev = Some(cur);
                    cur = e;
                }
                None => break,
            }
        }
        pts
    };

    // Open chains first (they start at a border edge with a single link).
    for &e in &all_edges {
        if !visited[idx(e)] && links[idx(e)].len() == 1 {
            contours.push(walk(e, &mut visited));
        }
    }
    for &e in &all_edges {
        if !visited[idx(e)] && !links[idx(e)].is_empty() {
            contours.push(walk(e, &mut visited));
        }
    }
    contours
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::geometry::bounding_box;

    fn square_field(r: usize, lo: usize, hi: usize) -> Vec<f64> {
        let mut f = vec![0.0; r * r];
        for i in lo..hi {
            for j in lo..hi {
                f[i * r + j] = 1.0;
            }
        }
        f
    }

    #[test]
    fn constant_field_has_no_contour() {
        assert!(extract_contour(&vec![0.0; 64], 8, 0.5).is_empty());
        assert!(extract_contour(&vec![1.0; 64], 8, 0.5).is_empty());
    }

    #[test]
    fn square_contour_bbox_within_one_pixel() {
        let r = 32;
        let f = square_field(r, 8, 20);
        let cs = extract_contour(&f, r, 0.5);
        assert_eq!(cs.len(), 1);
        let (lo, hi) = bounding_box(&cs[0]);
        // true square spans pixel edges 8..20
        let px = 2.0 / r as f64;
        let x0 = -1.0 + 8.0 * px;
        let x1 = -1.0 + 20.0 * px;
        assert!((lo.x - x0).abs() <= px && (hi.x - x1).abs() <= px);
        assert!((lo.y - (1.0 - 20.0 * px)).abs() <= px && (hi.y - (1.0 - 8.0 * px)).abs() <= px);
    }

    #[test]
    fn complement_gives_same_geometry() {
        let r = 24;
        let mut f = square_field(r, 5, 15);
        f[3 * r + 3] = 1.0; // isolated blob
        f[16 * r + 16] = 1.0; // diagonal neighbour creates a saddle
        f[15 * r + 15] = 0.0;
        let g: Vec<f64> = f.iter().map(|v| 1.0 - v).collect();
        let a = extract_contour(&f, r, 0.5);
        let b = extract_contour(&g, r, 0.5);
        assert_eq!(a.len(), b.len());
        let mut pa: Vec<(i64, i64)> = a
            .iter()
            .flatten()
            .map(|p| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64))
            .collect();
        let mut pb: Vec<(i64, i64)> = b
            .iter()
            .flatten()
            .map(|p| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64))
            .collect();
        pa.sort();
        pb.sort();
        assert_eq!(pa, pb);
    }

    #[test]
    fn border_touching_region_is_closed() {
        let r = 8;
        let mut f = vec![0.0; r * r];
        for i in 0..4 {
            for j in 0..4 {
                f[i * r + j] = 1.0;
            }
        }
        let cs = extract_contour(&f, r, 0.5);
        assert_eq!(cs.len(), 1);
        assert!(cs[0].len() >= 3);
    }
}
