use crate::geometry::Vec3;

use super::RenderError;

/// Pinhole camera at the origin looking down −z, image y pointing down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Points closer than this to the image plane are not projected.
pub const NEAR_PLANE: f64 = 1e-2;

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, RenderError> {
        if !(fx > 0.0 && fy > 0.0 && width >= 8 && height >= 8 && cx.is_finite() && cy.is_finite()) {
            return Err(RenderError::InvalidCamera);
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square-pixel camera with focal length equal to the image width and
    /// the principal point at the image centre.
    pub fn with_resolution(width: usize, height: usize) -> Result<Self, RenderError> {
        Camera::new(
            width as f64,
            width as f64,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )
    }

    /// Pixel coordinates `(u, v)` and depth `−z` of a camera-space point, or
    /// `None` in front of the near plane.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let depth = -p.z;
        if !(depth >= NEAR_PLANE) {
            return None;
        }
        Some((self.cx + self.fx * p.x / depth, self.cy - self.fy * p.y / depth, depth))
    }
}
