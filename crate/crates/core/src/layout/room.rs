use serde::{Deserialize, Serialize};

use super::geometry::{is_simple, point_in_polygon, signed_area, Point};
use crate::{Error, Result};

/// Minimum polygon area accepted as non-degenerate, in square meters.
pub const MIN_AREA: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub x: f64,
    pub y: f64,
    /// Height above the floor, meters.
    pub height: f64,
}

impl Camera {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A single room: a counter-clockwise simple polygon of wall corners (meters),
/// a flat ceiling and a panorama camera standing inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomLayout {
    pub id: String,
    pub corners: Vec<Point>,
    pub ceiling_height: f64,
    pub camera: Camera,
}

impl RoomLayout {
    /// Builds a layout and checks every invariant.
    pub fn new(
        id: impl Into<String>,
        corners: Vec<Point>,
        ceiling_height: f64,
        camera: Camera,
    ) -> Result<Self> {
        let layout = RoomLayout {
            id: id.into(),
            corners,
            ceiling_height,
            camera,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidLayout(format!("{}: {msg}", self.id)));
        if self.corners.len() < 3 {
            return fail(format!("{} corners, need at least 3", self.corners.len()));
        }
        if self
            .corners
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return fail("non-finite corner".into());
        }
        let area = signed_area(&self.corners);
        if area.abs() < MIN_AREA {
            return fail(format!("degenerate polygon (area {area:e} m^2)"));
        }
        if area < 0.0 {
            return fail("corners are clockwise".into());
        }
        if !is_simple(&self.corners) {
            return fail("polygon self-intersects".into());
        }
        if !(self.ceiling_height > 0.0 && self.ceiling_height.is_finite()) {
            return fail(format!(
                "ceiling height {} must be positive",
                self.ceiling_height
            ));
        }
        if !(self.camera.height > 0.0 && self.camera.height < self.ceiling_height) {
            return fail(format!(
                "camera height {} outside (0, {})",
                self.camera.height, self.ceiling_height
            ));
        }
        if !self.camera_strictly_inside() {
            return fail("camera is not strictly inside the polygon".into());
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.corners)
    }

    pub fn wall_count(&self) -> usize {
        self.corners.len()
    }

    fn camera_strictly_inside(&self) -> bool {
        let c = self.camera.position();
        point_in_polygon(c, &self.corners)
            && super::geometry::distance_to_boundary(c, &self.corners) > 1e-9
    }

    /// Rotates corners and camera jointly about the camera position.
    pub fn rotated_about_camera(&self, angle: f64) -> RoomLayout {
        let c = self.camera.position();
        let mut out = self.clone();
        for p in &mut out.corners {
            *p = p.sub(c).rotate(angle).add(c);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera {
            x: 2.0,
            y: 2.0,
            height: 1.6,
        }
    }

    fn sq() -> Vec<Point> {
        [(0., 0.), (4., 0.), (4., 4.), (0., 4.)]
            .map(|(x, y)| Point::new(x, y))
            .to_vec()
    }

    #[test]
    fn accepts_valid_square() {
        RoomLayout::new("sq", sq(), 3.2, cam()).unwrap();
    }

    #[test]
    fn rejects_clockwise_and_degenerate() {
        let mut cw = sq();
        cw.reverse();
        assert!(matches!(
            RoomLayout::new("cw", cw, 3.2, cam()),
            Err(Error::InvalidLayout(_))
        ));
        let flat = [(0., 0.), (4., 0.), (8., 0.)]
            .map(|(x, y)| Point::new(x, y))
            .to_vec();
        assert!(RoomLayout::new("flat", flat, 3.2, cam()).is_err());
    }

    #[test]
    fn rejects_bad_camera() {
        let outside = Camera { x: 5.0, ..cam() };
        assert!(RoomLayout::new("a", sq(), 3.2, outside).is_err());
        let on_wall = Camera { x: 4.0, ..cam() };
        assert!(RoomLayout::new("b", sq(), 3.2, on_wall).is_err());
        let too_high = Camera {
            height: 3.2,
            ..cam()
        };
        assert!(RoomLayout::new("c", sq(), 3.2, too_high).is_err());
    }
}
