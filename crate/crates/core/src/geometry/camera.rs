use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point3, Result, Vector3};

/// Sub-pixel image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn homogeneous(&self) -> Vector3 {
        Vector3::new(self.u, self.v, 1.0)
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Pinhole intrinsics. `width == height == 0` marks an unbounded image plane,
/// used for pure-math work where no raster is attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics without an attached image size. The principal point is not
    /// range-checked.
    pub fn unbounded(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(fx, fy, cx, cy, 0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|x| x.is_finite());
        if !finite {
            return Err(GeometryError::InvalidIntrinsics("non-finite entry"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if self.is_bounded() {
            if self.width == 0 || self.height == 0 {
                return Err(GeometryError::InvalidIntrinsics("zero image dimension"));
            }
            if !(self.cx > 0.0 && self.cx < self.width as f64) || !(self.cy > 0.0 && self.cy < self.height as f64) {
                return Err(GeometryError::InvalidIntrinsics("principal point outside the image"));
            }
        }
        Ok(())
    }

    pub fn is_bounded(&self) -> bool {
        self.width != 0 || self.height != 0
    }

    /// True when `px` falls inside the raster (always true when unbounded).
    pub fn contains(&self, px: Pixel) -> bool {
        if !self.is_bounded() {
            return px.is_finite();
        }
        px.u >= -0.5 && px.v >= -0.5 && px.u <= self.width as f64 - 0.5 && px.v <= self.height as f64 - 0.5
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `u = fx·x/z + cx`, `v = fy·y/z + cy`.
    pub fn project(&self, p: &Point3) -> Result<Pixel> {
        if p.z <= 0.0 || !p.z.is_finite() {
            return Err(GeometryError::NonPositiveDepth(p.z));
        }
        Ok(Pixel::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Viewing ray direction `K⁻¹·(u, v, 1)`, normalized to unit depth.
    pub fn ray(&self, px: Pixel) -> Vector3 {
        Vector3::new((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy, 1.0)
    }

    /// Intrinsics for the same camera resampled to `width × height`, using the
    /// pixel-center convention `u' = (u + ½)·s − ½`.
    pub fn rescaled(&self, width: u32, height: u32) -> Result<Self> {
        if !self.is_bounded() {
            return Err(GeometryError::InvalidIntrinsics("cannot rescale unbounded intrinsics"));
        }
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + 0.5) * sx - 0.5,
            (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        )
    }

    /// Uniform rescale by `factor` (e.g. 0.5 for a 1280×1024 → 640×512 resize).
    pub fn scaled_by(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("scale factor must be positive"));
        }
        if !self.is_bounded() {
            return Self::unbounded(self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor);
        }
        let w = (self.width as f64 * factor).round() as u32;
        let h = (self.height as f64 * factor).round() as u32;
        self.rescaled(w, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projects_principal_ray_and_similar_triangles() {
        let k = CameraIntrinsics::unbounded(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(k.project(&Point3::new(0.0, 0.0, 5.0)).unwrap(), Pixel::new(0.0, 0.0));
        let px = k.project(&Point3::new(1.0, 0.0, 5.0)).unwrap();
        assert!((px.u - 0.2).abs() < 1e-15 && px.v == 0.0);
    }

    #[test]
    fn projects_with_full_intrinsics() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 256.0, 640, 512).unwrap();
        let px = k.project(&Point3::new(10.0, -5.0, 50.0)).unwrap();
        assert!((px.u - 420.0).abs() < 1e-12);
        assert!((px.v - 206.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_points_behind_camera() {
        let k = CameraIntrinsics::unbounded(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(k.project(&Point3::new(0.0, 0.0, 0.0)), Err(GeometryError::NonPositiveDepth(0.0)));
        assert!(k.project(&Point3::new(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn validates_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 5.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn ray_inverts_projection() {
        let k = CameraIntrinsics::new(500.0, 480.0, 320.0, 256.0, 640, 512).unwrap();
        let px = Pixel::new(123.25, 400.5);
        let p = Point3::from(k.ray(px) * 37.0);
        let back = k.project(&p).unwrap();
        assert!(back.distance(&px) < 1e-10);
    }

    #[test]
    fn rescale_keeps_rays_through_pixel_centers() {
        let k = CameraIntrinsics::new(500.0, 500.0, 319.5, 255.5, 640, 512).unwrap();
        let half = k.rescaled(320, 256).unwrap();
        assert!((half.fx - 250.0).abs() < 1e-12);
        assert!((half.cx - 159.5).abs() < 1e-12);
        // pixel 10 at half resolution covers pixels 20 and 21 of the full image
        let r_half = half.ray(Pixel::new(10.0, 10.0));
        let r_full = k.ray(Pixel::new(20.5, 20.5));
        assert!((r_half - r_full).norm() < 1e-12);
    }
}
