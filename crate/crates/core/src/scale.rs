//! Metric scale from the instrument shaft.
//!
//! Pixels along the projected axis see the shaft surface at depths that follow
//! from the recovered pose. Fitting `relative ≈ η·metric + γ` on those pixels
//! and inverting the map metricizes the whole frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, CylinderAxis, GeometryError, ImageLine, Pixel};
use crate::pose::{estimate_pose_with_fallback, observe_shaft, PoseError, ShaftObservation, ToolPose};
use crate::raster::{Clamped, DepthMap, DepthUnit, RasterError, ShaftMask};

/// `|η|` at or below this is treated as zero.
pub const ETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("stride must be at least 1 pixel, got {0}")]
    InvalidStride(f64),
    #[error("only {0} usable samples, need at least 2")]
    InsufficientSamples(usize),
    #[error("sample lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("metric depths have zero variance")]
    DegenerateDesign,
    #[error("fitted gain is zero")]
    NumericalFailure,
    #[error("expected a relative depth map, got {0:?}")]
    UnitMismatch(DepthUnit),
    #[error("gain is zero")]
    ZeroEta,
    #[error("invalid sample set: {0}")]
    InvalidSamples(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type Result<T> = std::result::Result<T, ScaleError>;

/// Affine map `relative = eta·metric + gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub eta: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub residual_rms: f64,
}

impl ScaleParams {
    /// Parameters known a priori (no fit).
    pub fn exact(eta: f64, gamma: f64) -> Result<Self> {
        if !(eta.abs() > ETA_TOL) || !gamma.is_finite() {
            return Err(ScaleError::ZeroEta);
        }
        Ok(Self { eta, gamma, n_samples: 2, residual_rms: 0.0 })
    }

    pub fn to_metric(&self, relative: f64) -> f64 {
        (relative - self.gamma) / self.eta
    }
}

/// Axis pixels with matching metric and relative depths.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSampleSet {
    pixels: Vec<Pixel>,
    metric_depths: Vec<f64>,
    relative_depths: Vec<f64>,
}

impl AxisSampleSet {
    pub fn new(pixels: Vec<Pixel>, metric_depths: Vec<f64>, relative_depths: Vec<f64>) -> Result<Self> {
        if pixels.len() != metric_depths.len() {
            return Err(ScaleError::LengthMismatch(pixels.len(), metric_depths.len()));
        }
        if pixels.len() != relative_depths.len() {
            return Err(ScaleError::LengthMismatch(pixels.len(), relative_depths.len()));
        }
        if metric_depths.iter().any(|z| !(*z > 0.0)) {
            return Err(ScaleError::InvalidSamples("metric depths must be positive"));
        }
        for (i, p) in pixels.iter().enumerate() {
            if pixels[..i].contains(p) {
                return Err(ScaleError::InvalidSamples("pixels must be distinct"));
            }
        }
        Ok(Self { pixels, metric_depths, relative_depths })
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn metric_depths(&self) -> &[f64] {
        &self.metric_depths
    }

    pub fn relative_depths(&self) -> &[f64] {
        &self.relative_depths
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn fit(&self) -> Result<ScaleParams> {
        fit_scale(&self.metric_depths, &self.relative_depths)
    }
}

/// Integer pixels on `l_s`, `stride` apart, whose 4-neighbourhood lies in the
/// mask. Ordered from the end where the shaft leaves the image.
pub fn sample_axis_pixels(mask: &ShaftMask, l_s: &ImageLine, stride: f64) -> Result<Vec<Pixel>> {
    if !(stride >= 1.0) || !stride.is_finite() {
        return Err(ScaleError::InvalidStride(stride));
    }
    let (w, h) = mask.dims();
    let Some((start, end)) = l_s.clip_to_image(w as u32, h as u32) else {
        return Err(ScaleError::InsufficientSamples(0));
    };
    let length = start.distance(&end);
    let (du, dv) = ((end.u - start.u) / length.max(f64::MIN_POSITIVE), (end.v - start.v) / length.max(f64::MIN_POSITIVE));
    let inside = |x: i64, y: i64| {
        mask.get_signed(x, y) && mask.get_signed(x - 1, y) && mask.get_signed(x + 1, y) && mask.get_signed(x, y - 1) && mask.get_signed(x, y + 1)
    };

    let mut out: Vec<Pixel> = Vec::new();
    let steps = (length / stride).floor() as usize;
    for i in 0..=steps {
        let t = i as f64 * stride;
        let (x, y) = ((start.u + t * du).round() as i64, (start.v + t * dv).round() as i64);
        let px = Pixel::new(x as f64, y as f64);
        if inside(x, y) && out.last() != Some(&px) && !out.contains(&px) {
            out.push(px);
        }
    }
    if out.len() < 2 {
        return Err(ScaleError::InsufficientSamples(out.len()));
    }
    if let Some(border) = border_centroid(mask) {
        if out[out.len() - 1].distance(&border) < out[0].distance(&border) {
            out.reverse();
        }
    }
    Ok(out)
}

fn border_centroid(mask: &ShaftMask) -> Option<Pixel> {
    let (w, h) = mask.dims();
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in mask.foreground() {
        if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            su += x as f64;
            sv += y as f64;
            n += 1;
        }
    }
    (n > 0).then(|| Pixel::new(su / n as f64, sv / n as f64))
}

/// Near-surface depth of each pixel's ray. Pixels whose ray misses the shaft
/// are dropped together with their depth.
pub fn metric_depths_along_axis(axis: &CylinderAxis, k: &CameraIntrinsics, pixels: &[Pixel]) -> Result<(Vec<Pixel>, Vec<f64>)> {
    let mut kept = Vec::with_capacity(pixels.len());
    let mut depths = Vec::with_capacity(pixels.len());
    for px in pixels {
        if let Some(z) = axis.ray_depth(k, *px)? {
            if z > 0.0 {
                kept.push(*px);
                depths.push(z);
            }
        }
    }
    if kept.len() < 2 {
        return Err(ScaleError::InsufficientSamples(kept.len()));
    }
    Ok((kept, depths))
}

/// Ordinary least squares for `relative ≈ eta·metric + gamma`.
pub fn fit_scale(metric: &[f64], relative: &[f64]) -> Result<ScaleParams> {
    if metric.len() != relative.len() {
        return Err(ScaleError::LengthMismatch(metric.len(), relative.len()));
    }
    let n = metric.len();
    if n < 2 {
        return Err(ScaleError::InsufficientSamples(n));
    }
    let nf = n as f64;
    let mz = metric.iter().sum::<f64>() / nf;
    let md = relative.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (z, d) in metric.iter().zip(relative) {
        sxx += (z - mz) * (z - mz);
        sxy += (z - mz) * (d - md);
    }
    let zmax = metric.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    if !(sxx > nf * (f64::EPSILON * zmax).powi(2)) {
        return Err(ScaleError::DegenerateDesign);
    }
    let eta = sxy / sxx;
    if !(eta.abs() > ETA_TOL) {
        return Err(ScaleError::NumericalFailure);
    }
    let gamma = md - eta * mz;
    let sse: f64 = metric.iter().zip(relative).map(|(z, d)| (eta * z + gamma - d).powi(2)).sum();
    Ok(ScaleParams { eta, gamma, n_samples: n, residual_rms: (sse / nf).sqrt() })
}

/// Metric depth `(D − γ)/η` per pixel; negatives clamped to zero and counted.
pub fn apply_scale(d: &DepthMap, p: &ScaleParams) -> Result<Clamped<DepthMap>> {
    if d.unit() != DepthUnit::Relative {
        return Err(ScaleError::UnitMismatch(d.unit()));
    }
    if !(p.eta.abs() > ETA_TOL) {
        return Err(ScaleError::ZeroEta);
    }
    let values = d.values().iter().map(|v| p.to_metric(*v)).collect();
    Ok(DepthMap::from_clamped(d.width(), d.height(), values, DepthUnit::Millimeters)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    /// Spacing of axis samples in pixels.
    pub stride: f64,
    pub min_samples: usize,
    /// Minimum boundary-fit quality.
    pub min_quality: f64,
    /// Round model depths to `f32` before fitting, matching depth maps that
    /// were stored in single precision.
    #[serde(skip)]
    pub round_metric_to_f32: bool,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self { stride: 5.0, min_samples: 10, min_quality: 0.6, round_metric_to_f32: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RejectReason {
    #[error("input size mismatch")]
    SizeMismatch,
    #[error("{0}")]
    Pose(#[from] PoseError),
    #[error("boundary quality {0:.3} below threshold")]
    LowQuality(f64),
    #[error("{0} samples, fewer than required")]
    TooFewSamples(usize),
    #[error("{0}")]
    Scale(#[from] ScaleError),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
}

impl RejectReason {
    /// Stable short name for records.
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::SizeMismatch => "SizeMismatch",
            RejectReason::Pose(PoseError::MaskTooSmall(_)) => "MaskTooSmall",
            RejectReason::Pose(PoseError::BoundariesNotFound(_)) => "BoundariesNotFound",
            RejectReason::Pose(PoseError::NoInteriorTip) => "NoInteriorTip",
            RejectReason::Pose(PoseError::LineMissesMask) => "LineMissesMask",
            RejectReason::Pose(_) => "PoseFailed",
            RejectReason::LowQuality(_) => "LowQuality",
            RejectReason::TooFewSamples(_) | RejectReason::Scale(ScaleError::InsufficientSamples(_)) => "InsufficientSamples",
            RejectReason::Scale(_) => "ScaleFitFailed",
            RejectReason::Geometry(_) => "GeometryFailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("frame rejected: {reason}")]
pub struct FrameRejected {
    pub reason: RejectReason,
}

impl<E: Into<RejectReason>> From<E> for FrameRejected {
    fn from(e: E) -> Self {
        Self { reason: e.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub depth: Clamped<DepthMap>,
    pub pose: ToolPose,
    pub scale: ScaleParams,
    pub observation: ShaftObservation,
    pub samples: AxisSampleSet,
}

/// Full per-frame recovery from a relative depth map and a shaft mask.
pub fn recover_frame(
    relative: &DepthMap,
    mask: &ShaftMask,
    k: &CameraIntrinsics,
    radius: f64,
    cfg: &RecoveryConfig,
) -> std::result::Result<Recovery, FrameRejected> {
    if relative.dims() != mask.dims() {
        return Err(RejectReason::SizeMismatch.into());
    }
    let obs = observe_shaft(mask, k, radius)?;
    recover_from_observation(relative, mask, &obs, k, radius, cfg)
}

/// Recovery with the shaft boundaries and tip supplied by the caller.
pub fn recover_from_observation(
    relative: &DepthMap,
    mask: &ShaftMask,
    obs: &ShaftObservation,
    k: &CameraIntrinsics,
    radius: f64,
    cfg: &RecoveryConfig,
) -> std::result::Result<Recovery, FrameRejected> {
    if relative.dims() != mask.dims() {
        return Err(RejectReason::SizeMismatch.into());
    }
    if obs.quality < cfg.min_quality {
        return Err(RejectReason::LowQuality(obs.quality).into());
    }
    let pose = estimate_pose_with_fallback(obs, k, radius)?;
    let ls = pose.axis().image_line(k)?;
    let pixels = sample_axis_pixels(mask, &ls, cfg.stride)?;
    let (pixels, mut metric) = metric_depths_along_axis(pose.axis(), k, &pixels)?;
    if cfg.round_metric_to_f32 {
        metric.iter_mut().for_each(|z| *z = *z as f32 as f64);
    }
    if pixels.len() < cfg.min_samples {
        return Err(RejectReason::TooFewSamples(pixels.len()).into());
    }
    let rel = pixels.iter().map(|p| relative.get(p.u as usize, p.v as usize)).collect();
    let samples = AxisSampleSet::new(pixels, metric, rel)?;
    let scale = samples.fit()?;
    let depth = apply_scale(relative, &scale)?;
    Ok(Recovery { depth, pose, scale, observation: *obs, samples })
}
