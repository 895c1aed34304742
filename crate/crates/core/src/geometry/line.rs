use serde::{Deserialize, Serialize};

use super::{GeometryError, Pixel, Result, Vector3};

/// Homogeneous image line `a·u + b·v + c = 0` with `a² + b² = 1`.
///
/// The sign is part of the value (it orients the line) but two lines that
/// differ only in sign describe the same point set; use
/// [`ImageLine::distance_up_to_sign`] to compare them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct ImageLine {
    a: f64,
    b: f64,
    c: f64,
}

impl ImageLine {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a.hypot(b);
        if !(n > 0.0) || !c.is_finite() || !n.is_finite() {
            return Err(GeometryError::DegenerateLine);
        }
        Ok(Self { a: a / n, b: b / n, c: c / n })
    }

    pub fn from_homogeneous(l: &Vector3) -> Result<Self> {
        Self::new(l.x, l.y, l.z)
    }

    /// Line through two distinct pixels.
    pub fn through(p: Pixel, q: Pixel) -> Result<Self> {
        Self::from_homogeneous(&p.homogeneous().cross(&q.homogeneous()))
    }

    /// Hesse normal form: `u·cos θ + v·sin θ = ρ`.
    pub fn from_hesse(theta: f64, rho: f64) -> Result<Self> {
        Self::new(theta.cos(), theta.sin(), -rho)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn coeffs(&self) -> Vector3 {
        Vector3::new(self.a, self.b, self.c)
    }

    /// `(θ, ρ)` such that the line is `u·cos θ + v·sin θ = ρ`.
    pub fn hesse(&self) -> (f64, f64) {
        (self.b.atan2(self.a), -self.c)
    }

    pub fn signed_distance(&self, px: Pixel) -> f64 {
        self.a * px.u + self.b * px.v + self.c
    }

    pub fn flipped(&self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c }
    }

    /// Orients the line so that `px` has a non-negative signed distance.
    pub fn oriented_towards(&self, px: Pixel) -> Self {
        if self.signed_distance(px) < 0.0 {
            self.flipped()
        } else {
            *self
        }
    }

    /// Unit direction along the line.
    pub fn direction(&self) -> (f64, f64) {
        (-self.b, self.a)
    }

    /// Orthogonal projection of `px` onto the line.
    pub fn foot(&self, px: Pixel) -> Pixel {
        let d = self.signed_distance(px);
        Pixel::new(px.u - d * self.a, px.v - d * self.b)
    }

    /// Unsigned angle between the two lines in `[0, π/2]`.
    pub fn angle_to(&self, other: &ImageLine) -> f64 {
        let dot = (self.a * other.a + self.b * other.b).abs().min(1.0);
        let cross = (self.a * other.b - self.b * other.a).abs();
        cross.atan2(dot)
    }

    /// Max-coefficient difference after choosing the better relative sign.
    pub fn distance_up_to_sign(&self, other: &ImageLine) -> f64 {
        let d = |s: f64| {
            (self.a - s * other.a)
                .abs()
                .max((self.b - s * other.b).abs())
                .max((self.c - s * other.c).abs())
        };
        d(1.0).min(d(-1.0))
    }

    /// Homogeneous intersection point of two lines, `None` when parallel.
    pub fn intersection(&self, other: &ImageLine) -> Option<Pixel> {
        let p = self.coeffs().cross(&other.coeffs());
        if p.z.abs() < 1e-15 {
            return None;
        }
        Some(Pixel::new(p.x / p.z, p.y / p.z))
    }

    /// Segment of the line inside the pixel-center rectangle
    /// `[0, w−1] × [0, h−1]`, as `(start, end)` ordered along
    /// [`ImageLine::direction`].
    pub fn clip_to_image(&self, width: u32, height: u32) -> Option<(Pixel, Pixel)> {
        let (du, dv) = self.direction();
        let origin = self.foot(Pixel::new(0.0, 0.0));
        let (umax, vmax) = (width as f64 - 1.0, height as f64 - 1.0);
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (p, d, hi) in [(origin.u, du, umax), (origin.v, dv, vmax)] {
            if d.abs() < 1e-15 {
                if p < 0.0 || p > hi {
                    return None;
                }
                continue;
            }
            let (a, b) = ((0.0 - p) / d, (hi - p) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        if t0 > t1 {
            return None;
        }
        let at = |t: f64| Pixel::new(origin.u + t * du, origin.v + t * dv);
        Some((at(t0), at(t1)))
    }
}

impl TryFrom<[f64; 3]> for ImageLine {
    type Error = GeometryError;
    // Stored coefficients are kept bit-for-bit when already normalized.
    fn try_from(v: [f64; 3]) -> Result<Self> {
        let n = v[0].hypot(v[1]);
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON && v[2].is_finite() {
            return Ok(Self { a: v[0], b: v[1], c: v[2] });
        }
        Self::new(v[0], v[1], v[2])
    }
}

impl From<ImageLine> for [f64; 3] {
    fn from(l: ImageLine) -> Self {
        [l.a, l.b, l.c]
    }
}
