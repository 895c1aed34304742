use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{skew, CameraIntrinsics, GeometryError, ImageLine, Pixel, Point3, Result, Vector3};

/// Axis of a right circular cylinder in Plücker coordinates.
///
/// `s` is the unit direction and `m = s × p` the moment for any point `p` on
/// the axis. `(s, m)` and `(−s, −m)` are the same line; constructors pick the
/// representative whose first nonzero component of `s` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderAxis {
    s: Vector3,
    m: Vector3,
    radius: f64,
}

/// Intersection of a viewing ray with the cylinder surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter, `point = t·K⁻¹·(u, v, 1)`.
    pub t: f64,
    pub point: Point3,
}

impl CylinderAxis {
    /// Builds an axis from a (possibly unnormalized) Plücker pair. Both vectors
    /// are divided by `‖s‖`; the constraint `s·m = 0` must hold to 1e-9.
    pub fn from_plucker(s: Vector3, m: Vector3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidAxis("radius must be positive"));
        }
        let n = s.norm();
        if !(n > 0.0) || !n.is_finite() || !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidAxis("direction must be a nonzero finite vector"));
        }
        let (s, mut m) = (s / n, m / n);
        let sm = s.dot(&m);
        if sm.abs() > super::GEOMETRY_TOL * m.norm().max(1.0) {
            return Err(GeometryError::InvalidAxis("Plücker constraint s·m = 0 violated"));
        }
        m -= s * sm;
        Ok(Self::canonical(s, m, radius))
    }

    /// Axis through `point` with direction `dir`.
    pub fn through_point(point: &Point3, dir: &Vector3, radius: f64) -> Result<Self> {
        let n = dir.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(GeometryError::InvalidAxis("direction must be a nonzero finite vector"));
        }
        let s = dir / n;
        Self::from_plucker(s, s.cross(&point.coords), radius)
    }

    fn canonical(s: Vector3, m: Vector3, radius: f64) -> Self {
        let first = s.iter().copied().find(|c| *c != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            Self { s: -s, m: -m, radius }
        } else {
            Self { s, m, radius }
        }
    }

    pub fn direction(&self) -> Vector3 {
        self.s
    }

    pub fn moment(&self) -> Vector3 {
        self.m
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Same axis with a different shaft radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::from_plucker(self.s, self.m, radius)
    }

    /// The axis point nearest the camera center, `m × s`.
    pub fn foot(&self) -> Point3 {
        Point3::from(self.m.cross(&self.s))
    }

    pub fn point_at(&self, t: f64) -> Point3 {
        self.foot() + self.s * t
    }

    /// Axial coordinate of the orthogonal projection of `p` onto the axis.
    pub fn axial_parameter(&self, p: &Point3) -> f64 {
        self.s.dot(&p.coords)
    }

    /// Euclidean distance from `p` to the axis line.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        (self.s.cross(&p.coords) - self.m).norm()
    }

    /// `α = r / √(‖m‖² − r²)`; fails when the camera center is not strictly
    /// outside the cylinder.
    pub fn alpha(&self) -> Result<f64> {
        let mm = self.m.norm_squared();
        let rr = self.radius * self.radius;
        if mm == 0.0 || mm <= rr {
            return Err(GeometryError::DegenerateView);
        }
        Ok(self.radius / (mm - rr).sqrt())
    }

    /// The 4×4 symmetric quadric `Q` with `x̃ᵀ·Q·x̃ = 0` on the surface.
    pub fn quadric_matrix(&self) -> Matrix4<f64> {
        let sx = skew(&self.s);
        let top_left: Matrix3<f64> = sx * sx.transpose();
        let col = sx * self.m;
        let mut q = Matrix4::zeros();
        q.fixed_view_mut::<3, 3>(0, 0).copy_from(&top_left);
        q.fixed_view_mut::<3, 1>(0, 3).copy_from(&col);
        q.fixed_view_mut::<1, 3>(3, 0).copy_from(&col.transpose());
        q[(3, 3)] = self.m.norm_squared() - self.radius * self.radius;
        q
    }

    /// Surface residual `d(p)² − r²`, negative inside, zero on the surface.
    pub fn quadric_residual(&self, p: &Point3) -> f64 {
        let x = p.to_homogeneous();
        x.dot(&(self.quadric_matrix() * x))
    }

    /// Apparent contour `(l⁻, l⁺) = K⁻ᵀ·(I ∓ α[s]×)·m`.
    pub fn silhouette_lines(&self, k: &CameraIntrinsics) -> Result<(ImageLine, ImageLine)> {
        let alpha = self.alpha()?;
        let sm = self.s.cross(&self.m);
        let k_inv_t = k.inverse_matrix().transpose();
        let minus = ImageLine::from_homogeneous(&(k_inv_t * (self.m - sm * alpha)))?;
        let plus = ImageLine::from_homogeneous(&(k_inv_t * (self.m + sm * alpha)))?;
        Ok((minus, plus))
    }

    /// Image of the axis, `l_s = K⁻ᵀ·m`.
    pub fn image_line(&self, k: &CameraIntrinsics) -> Result<ImageLine> {
        ImageLine::from_homogeneous(&(k.inverse_matrix().transpose() * self.m))
    }

    pub fn plucker_matrix(&self) -> PluckerMatrix {
        PluckerMatrix::from_axis(self)
    }

    /// Nearest positive intersection of the viewing ray through `px` with the
    /// cylinder surface.
    pub fn ray_hit(&self, k: &CameraIntrinsics, px: Pixel) -> Result<Option<RayHit>> {
        if !px.is_finite() {
            return Err(GeometryError::InvalidPixel);
        }
        let d = k.ray(px);
        let sd = self.s.cross(&d);
        let a = sd.norm_squared();
        let b = -2.0 * sd.dot(&self.m);
        let c = self.m.norm_squared() - self.radius * self.radius;
        if a <= 1e-18 * d.norm_squared() {
            return Ok(None);
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Ok(None);
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let roots = if q == 0.0 { [0.0, 0.0] } else { [q / a, c / q] };
        let t = roots
            .iter()
            .copied()
            .filter(|t| *t > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !t.is_finite() {
            return Ok(None);
        }
        Ok(Some(RayHit { t, point: Point3::from(d * t) }))
    }

    /// Depth (camera z, mm) of the visible surface point along the ray through
    /// `px`, or `None` when the ray misses the cylinder.
    pub fn ray_depth(&self, k: &CameraIntrinsics, px: Pixel) -> Result<Option<f64>> {
        Ok(self.ray_hit(k, px)?.map(|h| h.point.z))
    }

    /// Largest of the distances from two points on `other` to `self`, plus the
    /// direction mismatch; zero iff the lines coincide.
    pub fn line_distance(&self, other: &CylinderAxis) -> f64 {
        let dir = self.s.cross(&other.s).norm();
        let p = other.foot();
        dir.max(self.distance_to(&p)).max(self.distance_to(&(p + other.s)))
    }
}

/// 4×4 antisymmetric Plücker matrix of an axis,
/// `L = [[ [m]×, −s ], [ sᵀ, 0 ]]`, so that `L·π` is the homogeneous
/// intersection of the axis with the plane `π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerMatrix(Matrix4<f64>);

impl PluckerMatrix {
    pub fn from_axis(axis: &CylinderAxis) -> Self {
        let mut l = Matrix4::zeros();
        l.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&axis.m));
        l.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-axis.s));
        l.fixed_view_mut::<1, 3>(3, 0).copy_from(&axis.s.transpose());
        Self(l)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Homogeneous meet `L·π`.
    pub fn meet(&self, plane: &Vector4<f64>) -> Vector4<f64> {
        self.0 * plane
    }

    /// Dehomogenized intersection point of the axis with `plane`.
    pub fn intersect_plane(&self, plane: &Vector4<f64>) -> Result<Point3> {
        let w = self.meet(plane);
        let scale = self.0.abs().max() * plane.norm();
        if w.norm() <= 1e-12 * scale {
            return Err(GeometryError::LineInPlane);
        }
        if w[3].abs() <= 1e-12 * plane.xyz().norm() {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok(Point3::new(w[0] / w[3], w[1] / w[3], w[2] / w[3]))
    }
}
