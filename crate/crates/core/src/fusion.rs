//! Multi-resolution fusion of relative depth with a guided filter.
//!
//! A low-resolution estimate is structurally consistent but blurry; a
//! high-resolution estimate of the same frame has detail but drifts. The
//! upsampled low-resolution map guides an edge-preserving filter over the
//! high-resolution one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Clamped, DepthMap, DepthUnit, RasterError};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("invalid size {0}x{1}")]
    InvalidSize(usize, usize),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("unit mismatch: {0:?} vs {1:?}")]
    UnitMismatch(DepthUnit, DepthUnit),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("median of the depth map is zero")]
    DegenerateMedian,
    #[error("invalid fusion config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type Result<T> = std::result::Result<T, FusionError>;

/// Quantity the guided filter operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionDomain {
    #[default]
    Depth,
    InverseDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub filter_radius: usize,
    /// Regularizer in squared median-normalized depth units.
    pub epsilon: f64,
    pub low_res: (usize, usize),
    pub high_res: (usize, usize),
    pub domain: FusionDomain,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { filter_radius: 8, epsilon: 1e-4, low_res: (320, 256), high_res: (480, 384), domain: FusionDomain::Depth }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.filter_radius < 1 {
            return Err(FusionError::InvalidConfig("filter radius must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(FusionError::NonPositiveEpsilon(self.epsilon));
        }
        let (lw, lh) = self.low_res;
        let (hw, hh) = self.high_res;
        if lw < 2 || lh < 2 {
            return Err(FusionError::InvalidSize(lw, lh));
        }
        if hw <= lw || hh <= lh {
            return Err(FusionError::InvalidSize(hw, hh));
        }
        Ok(())
    }
}

/// Bilinear resampling with pixel centers at integer coordinates and
/// edge clamping.
pub fn resize_bilinear(d: &DepthMap, width: usize, height: usize) -> Result<DepthMap> {
    if width < 2 || height < 2 {
        return Err(FusionError::InvalidSize(width, height));
    }
    let (sw, sh) = d.dims();
    let src = d.values();
    let axis = |dst: usize, n_dst: usize, n_src: usize| -> (usize, usize, f64) {
        let x = ((dst as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
        let x0 = x.floor() as usize;
        let x1 = (x0 + 1).min(n_src - 1);
        (x0, x1, x - x0 as f64)
    };
    let cols: Vec<_> = (0..width).map(|x| axis(x, width, sw)).collect();
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, height, sh);
        for &(x0, x1, fx) in &cols {
            let top = lerp(src[y0 * sw + x0], src[y0 * sw + x1], fx);
            let bottom = lerp(src[y1 * sw + x0], src[y1 * sw + x1], fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    Ok(DepthMap::new(width, height, out, d.unit())?)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Mean over the `(2r+1)²` window clipped to the image, normalized by the
/// clipped area. Separable running sums, O(N) in the window size.
pub fn box_mean(src: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let mut rows = vec![0.0; width * height];
    let mut prefix = vec![0.0; width.max(height) + 1];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            prefix[x + 1] = prefix[x] + row[x];
        }
        for x in 0..width {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(width - 1);
            rows[y * width + x] = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64;
        }
    }
    let mut out = vec![0.0; width * height];
    for x in 0..width {
        for y in 0..height {
            prefix[y + 1] = prefix[y] + rows[y * width + x];
        }
        for y in 0..height {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(height - 1);
            out[y * width + x] = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64;
        }
    }
    out
}

/// Guided filter on raw buffers; may return negative values.
pub fn guided_filter_values(guide: &[f64], input: &[f64], width: usize, height: usize, radius: usize, epsilon: f64) -> Vec<f64> {
    let mean = |v: &[f64]| box_mean(v, width, height, radius);
    let mean_i = mean(guide);
    let mean_p = mean(input);
    let ii: Vec<f64> = guide.iter().map(|g| g * g).collect();
    let ip: Vec<f64> = guide.iter().zip(input).map(|(g, p)| g * p).collect();
    let corr_ii = mean(&ii);
    let corr_ip = mean(&ip);

    let n = width * height;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 0..n {
        let var = corr_ii[k] - mean_i[k] * mean_i[k];
        let cov = corr_ip[k] - mean_i[k] * mean_p[k];
        let ak = cov / (var + epsilon);
        a.push(ak);
        b.push(mean_p[k] - ak * mean_i[k]);
    }
    let mean_a = mean(&a);
    let mean_b = mean(&b);
    (0..n).map(|k| mean_a[k] * guide[k] + mean_b[k]).collect()
}

/// Edge-preserving filter of `input` steered by `guide`. Negative outputs are
/// clamped to zero and counted.
pub fn guided_filter(guide: &DepthMap, input: &DepthMap, radius: usize, epsilon: f64) -> Result<Clamped<DepthMap>> {
    if guide.dims() != input.dims() {
        return Err(FusionError::DimensionMismatch(guide.dims(), input.dims()));
    }
    if guide.unit() != input.unit() {
        return Err(FusionError::UnitMismatch(guide.unit(), input.unit()));
    }
    if !(epsilon > 0.0) {
        return Err(FusionError::NonPositiveEpsilon(epsilon));
    }
    let (w, h) = guide.dims();
    let q = guided_filter_values(guide.values(), input.values(), w, h, radius, epsilon);
    Ok(DepthMap::from_clamped(w, h, q, input.unit())?)
}

/// Fuses a low-resolution and a high-resolution relative depth estimate of
/// the same frame. Output is at the high resolution.
pub fn fuse_multires(low: &DepthMap, high: &DepthMap, cfg: &FusionConfig) -> Result<Clamped<DepthMap>> {
    cfg.validate()?;
    if low.dims() != cfg.low_res {
        return Err(FusionError::DimensionMismatch(low.dims(), cfg.low_res));
    }
    if high.dims() != cfg.high_res {
        return Err(FusionError::DimensionMismatch(high.dims(), cfg.high_res));
    }
    for unit in [low.unit(), high.unit()] {
        if unit != DepthUnit::Relative {
            return Err(FusionError::UnitMismatch(unit, DepthUnit::Relative));
        }
    }
    let (low, high) = match cfg.domain {
        FusionDomain::Depth => (low.clone(), high.clone()),
        FusionDomain::InverseDepth => (invert(low)?, invert(high)?),
    };
    let (w, h) = high.dims();
    let low_up = resize_bilinear(&low, w, h)?;
    let med_low = median(low_up.values()).unwrap_or(0.0);
    let med_high = median(high.values()).unwrap_or(0.0);
    if !(med_high > 0.0) || !(med_low > 0.0) {
        return Err(FusionError::DegenerateMedian);
    }
    let guide: Vec<f64> = low_up.values().iter().map(|v| v / med_low).collect();
    let input: Vec<f64> = high.values().iter().map(|v| v / med_high).collect();
    let q = guided_filter_values(&guide, &input, w, h, cfg.filter_radius, cfg.epsilon);
    let fused = DepthMap::from_clamped(w, h, q.into_iter().map(|v| v * med_low).collect(), DepthUnit::Relative)?;
    Ok(match cfg.domain {
        FusionDomain::Depth => fused,
        FusionDomain::InverseDepth => Clamped { value: invert(&fused.value)?, clamped: fused.clamped },
    })
}

// Zero stays zero (no depth).
fn invert(d: &DepthMap) -> Result<DepthMap> {
    let values = d.values().iter().map(|v| if *v > 0.0 { 1.0 / v } else { 0.0 }).collect();
    Ok(DepthMap::new(d.width(), d.height(), values, d.unit())?)
}
