//! Straight shaft boundaries and the free tip from a binary mask.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PoseError, Result};
use crate::geometry::{ImageLine, Pixel};
use crate::raster::ShaftMask;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConfig {
    pub min_pixels: usize,
    /// Inlier distance for line hypotheses, pixels.
    pub inlier_px: f64,
    /// Edge points this close to the image border are ignored.
    pub border_px: f64,
    pub iterations: usize,
    /// Largest angle allowed between the two boundaries.
    pub max_angle_deg: f64,
    pub min_quality: f64,
    /// Each boundary must explain at least this fraction of all contour points.
    pub min_line_support: f64,
    pub seed: u64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            min_pixels: 200,
            inlier_px: 1.5,
            border_px: 2.0,
            iterations: 256,
            max_angle_deg: 30.0,
            min_quality: 0.3,
            min_line_support: 0.15,
            seed: 0x5eed_b0da,
        }
    }
}

/// Two boundary lines labeled by the side of the mask centroid (see
/// [`super::label_lines`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFit {
    pub line_minus: ImageLine,
    pub line_plus: ImageLine,
    /// Fraction of contour points within `inlier_px` of either line, tip cap
    /// excluded.
    pub quality: f64,
    pub centroid: Pixel,
}

pub fn extract_shaft_boundaries(mask: &ShaftMask) -> Result<BoundaryFit> {
    extract_shaft_boundaries_with(mask, &BoundaryConfig::default())
}

pub fn extract_shaft_boundaries_with(mask: &ShaftMask, cfg: &BoundaryConfig) -> Result<BoundaryFit> {
    let count = mask.count();
    if count < cfg.min_pixels {
        return Err(PoseError::MaskTooSmall(count));
    }
    let centroid = mask.centroid().ok_or(PoseError::MaskTooSmall(0))?;
    let points = contour_points(mask, cfg.border_px);
    if points.len() < 4 {
        return Err(PoseError::BoundariesNotFound("no usable contour"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ points.len() as u64);
    let mut active = vec![true; points.len()];
    let first = robust_line(&points, &active, &mut rng, cfg, |l| l.signed_distance(centroid).abs() > cfg.inlier_px)
        .ok_or(PoseError::BoundariesNotFound("no first boundary"))?
        .oriented_towards(centroid);
    for (a, p) in active.iter_mut().zip(&points) {
        if first.signed_distance(*p).abs() <= cfg.inlier_px {
            *a = false;
        }
    }
    let max_angle = cfg.max_angle_deg.to_radians();
    let second = robust_line(&points, &active, &mut rng, cfg, |l| {
        // the centroid must lie between the two lines
        let l = if l.a() * first.a() + l.b() * first.b() < 0.0 { l.flipped() } else { *l };
        first.angle_to(&l) <= max_angle && l.signed_distance(centroid) < -cfg.inlier_px
    })
    .ok_or(PoseError::BoundariesNotFound("no second boundary"))?;

    let foot = second.foot(centroid);
    if first.angle_to(&second) < 0.1f64.to_radians() && first.signed_distance(foot).abs() < 2.0 {
        return Err(PoseError::BoundariesNotFound("boundaries coincide"));
    }

    let support = |l: &ImageLine| points.iter().filter(|p| l.signed_distance(**p).abs() <= cfg.inlier_px).count();
    let min_support = cfg.min_line_support * points.len() as f64;
    if (support(&first) as f64) < min_support || (support(&second) as f64) < min_support {
        return Err(PoseError::BoundariesNotFound("boundary too short"));
    }

    let quality = inlier_ratio(&points, &first, &second, cfg.inlier_px);
    if quality < cfg.min_quality {
        return Err(PoseError::BoundariesNotFound("too few inliers"));
    }
    let (line_minus, line_plus) = super::label_lines(first, second, centroid);
    Ok(BoundaryFit { line_minus, line_plus, quality, centroid })
}

/// Midpoints between foreground pixels and 4-adjacent background pixels that
/// are connected to the outside of the mask (holes are ignored).
fn contour_points(mask: &ShaftMask, border: f64) -> Vec<Pixel> {
    let (w, h) = mask.dims();
    let outside = outside_background(mask);
    let mut points = Vec::new();
    let (umax, vmax) = (w as f64 - 1.0 - border, h as f64 - 1.0 - border);
    for (x, y) in mask.foreground() {
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            if !outside[ny as usize * w + nx as usize] {
                continue;
            }
            let p = Pixel::new(x as f64 + 0.5 * dx as f64, y as f64 + 0.5 * dy as f64);
            if p.u < border || p.v < border || p.u > umax || p.v > vmax {
                continue;
            }
            points.push(p);
        }
    }
    points
}

// Flood fill of background from the image border, 4-connected.
fn outside_background(mask: &ShaftMask) -> Vec<bool> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let push = |x: usize, y: usize, seen: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let i = y * w + x;
        if !seen[i] && !mask.get(x, y) {
            seen[i] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        push(x, 0, &mut seen, &mut queue);
        push(x, h - 1, &mut seen, &mut queue);
    }
    for y in 0..h {
        push(0, y, &mut seen, &mut queue);
        push(w - 1, y, &mut seen, &mut queue);
    }
    while let Some((x, y)) = queue.pop_front() {
        if x > 0 {
            push(x - 1, y, &mut seen, &mut queue);
        }
        if x + 1 < w {
            push(x + 1, y, &mut seen, &mut queue);
        }
        if y > 0 {
            push(x, y - 1, &mut seen, &mut queue);
        }
        if y + 1 < h {
            push(x, y + 1, &mut seen, &mut queue);
        }
    }
    seen
}

/// Randomized two-point hypotheses, best inlier count wins, then total least
/// squares on the inliers until the inlier set settles.
fn robust_line(
    points: &[Pixel],
    active: &[bool],
    rng: &mut ChaCha8Rng,
    cfg: &BoundaryConfig,
    accept: impl Fn(&ImageLine) -> bool,
) -> Option<ImageLine> {
    let idx: Vec<usize> = (0..points.len()).filter(|&i| active[i]).collect();
    if idx.len() < 2 {
        return None;
    }
    let count = |l: &ImageLine| idx.iter().filter(|&&i| l.signed_distance(points[i]).abs() <= cfg.inlier_px).count();
    let mut best: Option<(usize, ImageLine)> = None;
    for _ in 0..cfg.iterations {
        let p = points[idx[rng.random_range(0..idx.len())]];
        let q = points[idx[rng.random_range(0..idx.len())]];
        if p.distance(&q) < 4.0 {
            continue;
        }
        let Ok(line) = ImageLine::through(p, q) else { continue };
        if !accept(&line) {
            continue;
        }
        let n = count(&line);
        if best.as_ref().map_or(true, |(b, _)| n > *b) {
            best = Some((n, line));
        }
    }
    let (_, mut line) = best?;
    let mut prev = 0;
    for _ in 0..5 {
        let inliers: Vec<Pixel> =
            idx.iter().map(|&i| points[i]).filter(|p| line.signed_distance(*p).abs() <= cfg.inlier_px).collect();
        if inliers.len() < 2 || inliers.len() == prev {
            break;
        }
        prev = inliers.len();
        match total_least_squares(&inliers) {
            Some(l) if accept(&l) => line = l,
            _ => break,
        }
    }
    Some(line)
}

/// Orthogonal-regression line through a point set.
pub(crate) fn total_least_squares(points: &[Pixel]) -> Option<ImageLine> {
    let n = points.len() as f64;
    let (mu, mv) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.u, b + p.v));
    let (mu, mv) = (mu / n, mv / n);
    let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
    for p in points {
        let (du, dv) = (p.u - mu, p.v - mv);
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    // direction of largest spread; the normal is perpendicular to it
    let theta = 0.5 * (2.0 * suv).atan2(suu - svv);
    let (a, b) = (-theta.sin(), theta.cos());
    ImageLine::new(a, b, -(a * mu + b * mv)).ok()
}

// Inlier fraction over contour points whose position along the shaft lies
// within the extent of the straight boundaries (drops the tip cap).
fn inlier_ratio(points: &[Pixel], first: &ImageLine, second: &ImageLine, thr: f64) -> f64 {
    let (du, dv) = first.direction();
    let along = |p: &Pixel| p.u * du + p.v * dv;
    let is_inlier = |p: &Pixel| first.signed_distance(*p).abs() <= thr || second.signed_distance(*p).abs() <= thr;
    let (lo, hi) = points
        .iter()
        .filter(|p| is_inlier(p))
        .map(along)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let considered: Vec<&Pixel> = points.iter().filter(|p| (lo..=hi).contains(&along(p))).collect();
    if considered.is_empty() {
        return 0.0;
    }
    considered.iter().filter(|p| is_inlier(p)).count() as f64 / considered.len() as f64
}

/// The free end of the shaft along `axis_line`: the extreme foreground pixel
/// near the line at the end that does not touch the image border, projected
/// onto the line.
pub fn extract_tip_pixel(mask: &ShaftMask, axis_line: &ImageLine) -> Result<Pixel> {
    let (w, h) = mask.dims();
    let (du, dv) = axis_line.direction();
    let mut ends: Option<(f64, Pixel, f64, Pixel)> = None;
    for (x, y) in mask.foreground() {
        let p = Pixel::new(x as f64, y as f64);
        if axis_line.signed_distance(p).abs() > 1.0 {
            continue;
        }
        let t = p.u * du + p.v * dv;
        ends = Some(match ends {
            None => (t, p, t, p),
            Some((tlo, plo, thi, phi)) => {
                let (tlo, plo) = if t < tlo { (t, p) } else { (tlo, plo) };
                let (thi, phi) = if t > thi { (t, p) } else { (thi, phi) };
                (tlo, plo, thi, phi)
            }
        });
    }
    let (_, lo, _, hi) = ends.ok_or(PoseError::LineMissesMask)?;
    let (lo, hi) = (axis_line.foot(lo), axis_line.foot(hi));

    let near_border = |p: &Pixel| p.u.min(p.v).min(w as f64 - 1.0 - p.u).min(h as f64 - 1.0 - p.v) <= 2.0;
    match (near_border(&lo), near_border(&hi)) {
        (true, true) => Err(PoseError::NoInteriorTip),
        (true, false) => Ok(hi),
        (false, true) => Ok(lo),
        (false, false) => {
            let anchor = border_anchor(mask).unwrap_or(Pixel::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0));
            let far_from_anchor = border_anchor(mask).is_some();
            let (dl, dh) = (lo.distance(&anchor), hi.distance(&anchor));
            // no border contact: take the end nearer the image center
            Ok(if (dl > dh) == far_from_anchor { lo } else { hi })
        }
    }
}

// Centroid of the foreground pixels on the outermost image rows and columns.
fn border_anchor(mask: &ShaftMask) -> Option<Pixel> {
    let (w, h) = mask.dims();
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in mask.foreground() {
        if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
            su += x as f64;
            sv += y as f64;
            n += 1;
        }
    }
    (n > 0).then(|| Pixel::new(su / n as f64, sv / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(w: usize, h: usize, v0: f64, half: f64, u_end: usize) -> ShaftMask {
        ShaftMask::from_fn(w, h, |x, y| x <= u_end && (y as f64 - v0).abs() < half).unwrap()
    }

    #[test]
    fn rectangle_edges() {
        // rows 80..=119
        let mask = ShaftMask::from_fn(640, 512, |_, y| (80..120).contains(&y)).unwrap();
        let fit = extract_shaft_boundaries(&mask).unwrap();
        let want = [ImageLine::new(0.0, 1.0, -79.5).unwrap(), ImageLine::new(0.0, 1.0, -119.5).unwrap()];
        for l in [fit.line_minus, fit.line_plus] {
            let err = want.iter().map(|w| w.distance_up_to_sign(&l)).fold(f64::INFINITY, f64::min);
            assert!(err < 0.5, "{l:?}");
        }
        assert!(fit.quality > 0.99);
        assert!(fit.line_minus.signed_distance(fit.centroid) > 0.0);
        assert!(fit.line_plus.signed_distance(fit.centroid) < 0.0);
    }

    #[test]
    fn empty_mask_is_too_small() {
        let mask = ShaftMask::empty(64, 64).unwrap();
        assert_eq!(extract_shaft_boundaries(&mask), Err(PoseError::MaskTooSmall(0)));
    }

    #[test]
    fn blob_without_lines_fails() {
        let mask = ShaftMask::from_fn(200, 200, |x, y| {
            let (dx, dy) = (x as f64 - 100.0, y as f64 - 100.0);
            dx * dx + dy * dy < 40.0 * 40.0
        })
        .unwrap();
        assert!(matches!(extract_shaft_boundaries(&mask), Err(PoseError::BoundariesNotFound(_))));
    }

    #[test]
    fn ignores_holes() {
        let mut mask = ShaftMask::from_fn(640, 512, |_, y| (80..120).contains(&y)).unwrap();
        for x in 300..305 {
            mask.set(x, 100, false);
        }
        let fit = extract_shaft_boundaries(&mask).unwrap();
        assert!(fit.quality > 0.99);
    }

    #[test]
    fn tip_of_border_attached_rectangle() {
        let mask = band(640, 512, 100.0, 20.0, 400);
        let axis = ImageLine::new(0.0, 1.0, -100.0).unwrap();
        let tip = extract_tip_pixel(&mask, &axis).unwrap();
        assert!(tip.distance(&Pixel::new(400.0, 100.0)) <= 1.0, "{tip:?}");
    }

    #[test]
    fn tip_requires_free_end() {
        let mask = band(640, 512, 100.0, 20.0, 639);
        let axis = ImageLine::new(0.0, 1.0, -100.0).unwrap();
        assert_eq!(extract_tip_pixel(&mask, &axis), Err(PoseError::NoInteriorTip));
        let off = ImageLine::new(0.0, 1.0, -300.0).unwrap();
        assert_eq!(extract_tip_pixel(&mask, &off), Err(PoseError::LineMissesMask));
    }

    #[test]
    fn floating_shaft_tip_is_away_from_border_contact() {
        // touches the bottom border at its left end only (through a thin stalk)
        let mut mask = ShaftMask::from_fn(640, 512, |x, y| (100..=500).contains(&x) && (y as f64 - 200.0).abs() < 15.0).unwrap();
        for y in 200..512 {
            for x in 100..106 {
                mask.set(x, y, true);
            }
        }
        let axis = ImageLine::new(0.0, 1.0, -200.0).unwrap();
        let tip = extract_tip_pixel(&mask, &axis).unwrap();
        assert!(tip.distance(&Pixel::new(500.0, 200.0)) <= 1.0);
    }

    #[test]
    fn tls_recovers_exact_line() {
        let pts: Vec<Pixel> = (0..20).map(|i| Pixel::new(i as f64, 0.5 * i as f64 + 3.0)).collect();
        let l = total_least_squares(&pts).unwrap();
        for p in &pts {
            assert!(l.signed_distance(*p).abs() < 1e-12);
        }
    }
}
