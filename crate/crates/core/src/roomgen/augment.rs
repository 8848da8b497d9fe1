//! Conditional uniform wall translation.
//!
//! One wall of an existing room is pushed along its outward normal by an
//! offset drawn uniformly from `[-L_min/2, L_min/2]`, where `L_min` is the
//! length of the room's shortest wall. The two neighbouring walls stretch or
//! shrink to stay attached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layout::geometry::{edge_lengths, Point};
use crate::layout::RoomLayout;
use crate::{Error, Result};

/// Shortest edge allowed after translation, meters.
pub const MIN_EDGE_AFTER: f64 = 1e-3;
const MAX_RESAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub anchor_id: String,
    pub wall_index: usize,
    /// Signed translation along the outward normal, meters.
    pub offset: f64,
    pub l_min: f64,
}

/// Outward unit normal of wall `i` of a counter-clockwise polygon.
pub fn outward_normal(corners: &[Point], i: usize) -> Point {
    let a = corners[i];
    let b = corners[(i + 1) % corners.len()];
    let d = b.sub(a);
    let len = d.norm();
    Point::new(d.y / len, -d.x / len)
}

/// Moves both endpoints of wall `wall_index` by `offset` along its outward normal.
/// The result is not validated.
pub fn translate_wall(layout: &RoomLayout, wall_index: usize, offset: f64) -> RoomLayout {
    let n = layout.corners.len();
    let shift = outward_normal(&layout.corners, wall_index).scale(offset);
    let mut out = layout.clone();
    out.corners[wall_index] = out.corners[wall_index].add(shift);
    let j = (wall_index + 1) % n;
    out.corners[j] = out.corners[j].add(shift);
    out
}

fn acceptable(candidate: &RoomLayout) -> bool {
    candidate.validate().is_ok()
        && edge_lengths(&candidate.corners)
            .iter()
            .all(|&l| l >= MIN_EDGE_AFTER)
}

/// Augments one anchor. The wall is drawn once; invalid offsets are redrawn.
pub fn augment(anchor: &RoomLayout, seed: u64) -> Result<(RoomLayout, AugmentationRecord)> {
    anchor.validate()?;
    let n = anchor.corners.len();
    let l_min = edge_lengths(&anchor.corners)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wall_index = rng.random_range(0..n);
    let half = 0.5 * l_min;
    for _ in 0..MAX_RESAMPLES {
        let offset = rng.random_range(-half..=half);
        let mut candidate = translate_wall(anchor, wall_index, offset);
        if acceptable(&candidate) {
            candidate.id = format!("{}-aug-{seed:016x}", anchor.id);
            let record = AugmentationRecord {
                anchor_id: anchor.id.clone(),
                wall_index,
                offset,
                l_min,
            };
            return Ok((candidate, record));
        }
    }
    Err(Error::Augmentation(format!(
        "{}: {MAX_RESAMPLES} consecutive invalid offsets for wall {wall_index}",
        anchor.id
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::geometry::signed_area;
    use crate::layout::Camera;

    fn rect() -> RoomLayout {
        RoomLayout::new(
            "rect",
            [(0., 0.), (4., 0.), (4., 3.), (0., 3.)]
                .map(|(x, y)| Point::new(x, y))
                .to_vec(),
            3.0,
            Camera {
                x: 2.0,
                y: 1.5,
                height: 1.5,
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_offset_is_identity() {
        let r = rect();
        for w in 0..4 {
            assert_eq!(translate_wall(&r, w, 0.0).corners, r.corners);
        }
    }

    #[test]
    fn pushing_east_wall_out_grows_rectangle() {
        let r = rect();
        // wall 1 runs (4,0) -> (4,3); its outward normal is +x
        assert_eq!(outward_normal(&r.corners, 1), Point::new(1.0, 0.0));
        let moved = translate_wall(&r, 1, 1.0);
        assert!(acceptable(&moved));
        assert_eq!(signed_area(&moved.corners), 15.0);
        assert_eq!(moved.corners[1], Point::new(5.0, 0.0));
        assert_eq!(moved.corners[2], Point::new(5.0, 3.0));
    }

    #[test]
    fn record_is_bounded_and_deterministic() {
        let r = rect();
        for seed in 0..500 {
            let (a, rec) = augment(&r, seed).unwrap();
            assert_eq!(rec.l_min, 3.0);
            assert!(rec.offset.abs() <= 1.5);
            assert!(rec.wall_index < 4);
            assert_eq!(a.corners.len(), 4);
            let (b, rec2) = augment(&r, seed).unwrap();
            assert_eq!((a, rec), (b, rec2));
        }
    }
}
