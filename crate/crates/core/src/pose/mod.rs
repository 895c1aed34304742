//! Instrument pose from shaft silhouettes.
//!
//! The two straight boundaries of a cylindrical shaft fix its axis once the
//! shaft radius is known; the tip pixel then picks a point along that axis.
//! Roll about the shaft is not observable and is filled in by an orthonormal
//! completion.

mod boundaries;

pub use boundaries::{extract_shaft_boundaries, extract_shaft_boundaries_with, extract_tip_pixel, BoundaryConfig, BoundaryFit};

use nalgebra::{Matrix3, Matrix3x4, Vector4};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, CylinderAxis, GeometryError, ImageLine, Pixel, Point3, Vector3};
use crate::raster::ShaftMask;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("mask has {0} foreground pixels, too few to fit boundaries")]
    MaskTooSmall(usize),
    #[error("shaft boundaries not found: {0}")]
    BoundariesNotFound(&'static str),
    #[error("both shaft ends touch the image border")]
    NoInteriorTip,
    #[error("the axis line does not cross the mask")]
    LineMissesMask,
    #[error("boundary lines back-project to the same plane")]
    DegenerateLines,
    #[error("no sign combination puts the axis in front of the camera between the boundaries")]
    NoValidSignCombination,
    #[error("the axis is parallel to the tip back-projection plane")]
    TipPlaneDegenerate,
    #[error("tip pixel lies outside the image")]
    TipOutsideImage,
    #[error("recovered tip is not in front of the camera (z = {0})")]
    TipBehindCamera(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, PoseError>;

/// Image-space primitives of one shaft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShaftObservation {
    pub line_minus: ImageLine,
    pub line_plus: ImageLine,
    pub tip: Pixel,
    /// A pixel known to lie on the shaft between the two lines (mask
    /// centroid); selects among the mirror solutions of the axis.
    pub interior: Pixel,
    /// Boundary-fit inlier ratio in `[0, 1]`.
    pub quality: f64,
}

/// Which back-projected plane through the tip pixel is intersected with the
/// axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TipPlane {
    /// Pixel column `u = u_tip`: `π = (fx, 0, cx − u, 0)`.
    Column,
    /// Pixel row `v = v_tip`: `π = (0, fy, cy − v, 0)`.
    Row,
}

impl TipPlane {
    pub fn plane(self, k: &CameraIntrinsics, tip: Pixel) -> Vector4<f64> {
        match self {
            TipPlane::Column => Vector4::new(k.fx, 0.0, k.cx - tip.u, 0.0),
            TipPlane::Row => Vector4::new(0.0, k.fy, k.cy - tip.v, 0.0),
        }
    }
}

/// Threshold on `|ŝ·n̂|` below which a tip plane counts as parallel to the axis.
pub const TIP_PLANE_TOL: f64 = 1e-6;

/// 3-D instrument pose: shaft axis and tip in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolPose {
    axis: CylinderAxis,
    tip: Point3,
    rotation: Matrix3<f64>,
}

impl ToolPose {
    /// Snaps `tip` onto the axis; fails if it is farther than 1e-6 (relative)
    /// from it or behind the camera.
    pub fn new(axis: CylinderAxis, tip: Point3) -> Result<Self> {
        let scale = tip.coords.norm().max(1.0);
        if axis.distance_to(&tip) > 1e-6 * scale {
            return Err(PoseError::Geometry(GeometryError::InvalidAxis("tip is not on the axis")));
        }
        let tip = axis.point_at(axis.axial_parameter(&tip));
        if !(tip.z > 0.0) {
            return Err(PoseError::TipBehindCamera(tip.z));
        }
        Ok(Self { axis, tip, rotation: completion_frame(&axis.direction()) })
    }

    pub fn axis(&self) -> &CylinderAxis {
        &self.axis
    }

    pub fn tip(&self) -> Point3 {
        self.tip
    }

    /// Rotation with the shaft direction as its z-column.
    pub fn rotation(&self) -> Matrix3<f64> {
        self.rotation
    }

    /// `[R | t]` with `t` the tip.
    pub fn frame(&self) -> Matrix3x4<f64> {
        let mut f = Matrix3x4::zeros();
        f.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        f.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.tip.coords);
        f
    }
}

// Gram–Schmidt against camera x, or camera y when the shaft is close to x.
fn completion_frame(s: &Vector3) -> Matrix3<f64> {
    let reference = if s.x.abs() > 0.9 { Vector3::y() } else { Vector3::x() };
    let x = (reference - s * reference.dot(s)).normalize();
    let y = s.cross(&x);
    Matrix3::from_columns(&[x, y, *s])
}

/// Inverts the silhouette equation: the axis whose apparent contour under `k`
/// is the pair of lines, for a shaft of radius `radius`.
pub fn estimate_axis(
    l_minus: &ImageLine,
    l_plus: &ImageLine,
    k: &CameraIntrinsics,
    radius: f64,
    interior_hint: Pixel,
) -> Result<CylinderAxis> {
    if !(radius > 0.0) {
        return Err(GeometryError::InvalidAxis("radius must be positive").into());
    }
    let kt = k.matrix().transpose();
    let n_minus = (kt * l_minus.coeffs()).normalize();
    let n_plus = (kt * l_plus.coeffs()).normalize();
    let cross = n_minus.cross(&n_plus);
    if cross.norm() < 1e-12 {
        return Err(PoseError::DegenerateLines);
    }
    let s = cross.normalize();
    let system = Matrix3::from_rows(&[s.transpose(), n_minus.transpose(), n_plus.transpose()]);
    let lu = system.lu();

    let hint_ray = k.ray(interior_hint);
    let hint_side = (l_minus.signed_distance(interior_hint), l_plus.signed_distance(interior_hint));
    for (sm, sp) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let Some(p) = lu.solve(&Vector3::new(0.0, sm * radius, sp * radius)) else {
            return Err(PoseError::DegenerateLines);
        };
        let axis = CylinderAxis::from_plucker(s, s.cross(&p), radius)?;
        let x = nearest_axis_point_to_ray(&axis, &hint_ray);
        if !(x.z > 0.0) {
            continue;
        }
        let px = k.project(&x)?;
        let same = |a: f64, b: f64| a * b > 0.0;
        if same(l_minus.signed_distance(px), hint_side.0) && same(l_plus.signed_distance(px), hint_side.1) {
            return Ok(axis);
        }
    }
    Err(PoseError::NoValidSignCombination)
}

// Point on the axis closest to the line through the camera center along `ray`.
fn nearest_axis_point_to_ray(axis: &CylinderAxis, ray: &Vector3) -> Point3 {
    let p0 = axis.foot();
    let s = axis.direction();
    let a = ray.dot(ray);
    let b = ray.dot(&s);
    let denom = a - b * b;
    if denom <= 1e-12 * a {
        return p0;
    }
    let d = ray.dot(&(-p0.coords));
    let e = s.dot(&(-p0.coords));
    let u = (a * e - b * d) / denom;
    p0 + s * u
}

/// Intersects the axis with the back-projected plane through `tip`.
pub fn tip_on_axis(axis: &CylinderAxis, k: &CameraIntrinsics, tip: Pixel, plane: TipPlane) -> Result<Point3> {
    let pi = plane.plane(k, tip);
    let n = pi.xyz().normalize();
    if axis.direction().dot(&n).abs() < TIP_PLANE_TOL {
        return Err(PoseError::TipPlaneDegenerate);
    }
    Ok(axis.plucker_matrix().intersect_plane(&pi)?)
}

/// Axis from the boundaries, tip from the pixel-column plane.
pub fn estimate_pose(obs: &ShaftObservation, k: &CameraIntrinsics, radius: f64) -> Result<ToolPose> {
    if !k.contains(obs.tip) {
        return Err(PoseError::TipOutsideImage);
    }
    let axis = estimate_axis(&obs.line_minus, &obs.line_plus, k, radius, obs.interior)?;
    let tip = tip_on_axis(&axis, k, obs.tip, TipPlane::Column)?;
    ToolPose::new(axis, tip)
}

/// [`estimate_pose`], retrying with the pixel-row plane when the column plane
/// is parallel to the axis.
pub fn estimate_pose_with_fallback(obs: &ShaftObservation, k: &CameraIntrinsics, radius: f64) -> Result<ToolPose> {
    match estimate_pose(obs, k, radius) {
        Err(PoseError::TipPlaneDegenerate) => {
            let axis = estimate_axis(&obs.line_minus, &obs.line_plus, k, radius, obs.interior)?;
            let tip = tip_on_axis(&axis, k, obs.tip, TipPlane::Row)?;
            ToolPose::new(axis, tip)
        }
        other => other,
    }
}

/// Moves a pixel on the near rim of the shaft end (the extreme mask pixel on
/// the axis image) to the projection of the axis point at the same axial
/// position. Returns `rim` unchanged if its ray misses the cylinder.
pub fn tip_pixel_from_rim(axis: &CylinderAxis, k: &CameraIntrinsics, rim: Pixel) -> Result<Pixel> {
    match axis.ray_hit(k, rim)? {
        Some(hit) => {
            let on_axis = axis.point_at(axis.axial_parameter(&hit.point));
            Ok(k.project(&on_axis)?)
        }
        None => Ok(rim),
    }
}

/// Boundaries, axis and tip of the shaft in `mask`.
pub fn observe_shaft(mask: &ShaftMask, k: &CameraIntrinsics, radius: f64) -> Result<ShaftObservation> {
    let fit = extract_shaft_boundaries(mask)?;
    let axis = estimate_axis(&fit.line_minus, &fit.line_plus, k, radius, fit.centroid)?;
    let ls = axis.image_line(k)?;
    let rim = extract_tip_pixel(mask, &ls)?;
    let tip = tip_pixel_from_rim(&axis, k, rim)?;
    Ok(ShaftObservation {
        line_minus: fit.line_minus,
        line_plus: fit.line_plus,
        tip,
        interior: fit.centroid,
        quality: fit.quality,
    })
}

/// Labels two silhouette lines by the side of `interior`: `l⁻` keeps the
/// interior on its positive side, `l⁺` on its negative side.
pub fn label_lines(first: ImageLine, second: ImageLine, interior: Pixel) -> (ImageLine, ImageLine) {
    let minus = first.oriented_towards(interior);
    let plus = second.oriented_towards(interior).flipped();
    (minus, plus)
}
