#![allow(dead_code)]

use endoscale::geometry::{CameraIntrinsics, CylinderAxis, Pixel, Point3, Vector3};
use proptest::prelude::*;

pub fn k500() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 320.0, 256.0, 640, 512).unwrap()
}

pub fn identity() -> CameraIntrinsics {
    CameraIntrinsics::unbounded(1.0, 1.0, 0.0, 0.0).unwrap()
}

pub fn c1() -> CylinderAxis {
    CylinderAxis::through_point(&Point3::new(0.0, 0.0, 5.0), &Vector3::x(), 1.0).unwrap()
}

/// Direction with `|s_z| < max_z`, from two uniforms.
pub fn direction(z: f64, phi: f64) -> Vector3 {
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Axes seen by `k500`: a point on the axis projects into the image at the
/// given depth.
pub fn axis_strategy(depth: (f64, f64)) -> impl Strategy<Value = CylinderAxis> {
    (40.0..600.0f64, 40.0..470.0f64, depth.0..depth.1, 2.0..6.0f64, -0.95..0.95f64, 0.0..std::f64::consts::TAU).prop_filter_map(
        "axis too close to the camera centre",
        |(u, v, z, r, sz, phi)| {
            let p = Point3::from(k500().ray(Pixel::new(u, v)) * z);
            let a = CylinderAxis::through_point(&p, &direction(sz, phi), r).ok()?;
            (a.moment().norm() > 1.5 * r).then_some(a)
        },
    )
}
