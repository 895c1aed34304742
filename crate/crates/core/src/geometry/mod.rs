//! Pinhole projection, image lines, Plücker lines and the cylinder quadric.
//!
//! Everything in here is a plain value type with pure methods. Lengths are in
//! millimeters in the camera frame (z forward), image coordinates in pixels
//! with the pixel `(i, j)` centered at `u = i`, `v = j`.

mod camera;
mod cylinder;
mod line;

pub use camera::{CameraIntrinsics, Pixel};
pub use cylinder::{CylinderAxis, PluckerMatrix, RayHit};
pub use line::ImageLine;

use thiserror::Error;

/// A point in the camera frame, millimeters.
pub type Point3 = nalgebra::Point3<f64>;
/// A free vector in the camera frame.
pub type Vector3 = nalgebra::Vector3<f64>;

/// Absolute tolerance for geometric identities at endoscopic scale.
pub const GEOMETRY_TOL: f64 = 1e-9;
/// Tolerance on unit-norm checks.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("invalid cylinder axis: {0}")]
    InvalidAxis(&'static str),
    #[error("degenerate view: camera center on or inside the cylinder")]
    DegenerateView,
    #[error("degenerate image line: a and b are both zero")]
    DegenerateLine,
    #[error("the axis lies in the plane")]
    LineInPlane,
    #[error("the axis is parallel to the plane")]
    PointAtInfinity,
    #[error("pixel coordinates are not finite")]
    InvalidPixel,
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vector3) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
