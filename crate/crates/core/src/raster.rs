//! Row-major rasters: depth maps and binary shaft masks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pixel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthUnit {
    /// Scale-ambiguous output of a monocular network.
    Relative,
    Millimeters,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("raster has {got} values but {width}x{height} needs {want}")]
    LengthMismatch { width: usize, height: usize, want: usize, got: usize },
    #[error("depth value {value} at index {index} is negative or not finite")]
    InvalidDepth { index: usize, value: f64 },
    #[error("raster dimensions must be nonzero")]
    Empty,
}

/// A value together with the number of entries that had to be clamped to
/// zero while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Clamped<T> {
    pub value: T,
    pub clamped: usize,
}

/// Grid of non-negative finite depths with a unit tag.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    unit: DepthUnit,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, unit: DepthUnit) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        if values.len() != width * height {
            return Err(RasterError::LengthMismatch { width, height, want: width * height, got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(RasterError::InvalidDepth { index, value });
        }
        Ok(Self { width, height, values, unit })
    }

    pub fn filled(width: usize, height: usize, value: f64, unit: DepthUnit) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height], unit)
    }

    /// Builds a map from possibly negative values, clamping them to zero.
    pub fn from_clamped(width: usize, height: usize, mut values: Vec<f64>, unit: DepthUnit) -> Result<Clamped<Self>, RasterError> {
        let mut clamped = 0;
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
        Ok(Clamped { value: Self::new(width, height, values, unit)?, clamped })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn unit(&self) -> DepthUnit {
        self.unit
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Value at the integer pixel nearest to `px`, if inside.
    pub fn sample_nearest(&self, px: Pixel) -> Option<f64> {
        let (x, y) = (px.u.round(), px.v.round());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some(self.get(x as usize, y as usize))
    }

    pub fn with_unit(self, unit: DepthUnit) -> Self {
        Self { unit, ..self }
    }

    /// Rounds every value to the nearest `f32`, as stored on disk.
    pub fn quantized_f32(&self) -> Self {
        Self { values: self.values.iter().map(|v| *v as f32 as f64).collect(), ..self.clone() }
    }
}

/// Binary occupancy grid of one instrument shaft.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShaftMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ShaftMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        if bits.len() != width * height {
            return Err(RasterError::LengthMismatch { width, height, want: width * height, got: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self, RasterError> {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    /// Like [`ShaftMask::get`] but `false` outside the raster.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn centroid(&self) -> Option<Pixel> {
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    su += x as f64;
                    sv += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| Pixel::new(su / n as f64, sv / n as f64))
    }

    /// Foreground pixels, row-major.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).filter(move |&x| self.get(x, y)).map(move |x| (x, y)))
    }
}
