//! Depth error metrics, median scaling, and instrument pose errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vector3;
use crate::pose::ToolPose;
use crate::raster::{DepthMap, ShaftMask};
use crate::stats::{mean_std, median_in_place};

pub const DELTA_THRESHOLD: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("no valid pixels")]
    NoValidPixels,
    #[error("median is zero")]
    ZeroMedian,
    #[error("nothing to aggregate")]
    EmptyList,
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub mae: f64,
    pub delta_125: f64,
    pub n_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrors {
    pub ori_x_deg: f64,
    pub ori_y_deg: f64,
    pub tip_x_mm: f64,
    pub tip_y_mm: f64,
    pub tip_z_mm: f64,
}

fn check_dims(pred: &DepthMap, gt: &DepthMap, valid: Option<&ShaftMask>) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(EvalError::DimensionMismatch(pred.dims(), gt.dims()));
    }
    if let Some(m) = valid {
        if m.dims() != gt.dims() {
            return Err(EvalError::DimensionMismatch(m.dims(), gt.dims()));
        }
    }
    Ok(())
}

// (pred, gt) over pixels with gt > 0 inside the optional mask.
fn valid_pairs<'a>(pred: &'a DepthMap, gt: &'a DepthMap, valid: Option<&'a ShaftMask>) -> impl Iterator<Item = (f64, f64)> + 'a {
    let bits = valid.map(|m| m.bits());
    pred.values()
        .iter()
        .zip(gt.values())
        .enumerate()
        .filter(move |(i, (_, g))| **g > 0.0 && bits.is_none_or(|b| b[*i]))
        .map(|(_, (p, g))| (*p, *g))
}

/// The six standard depth metrics over pixels with positive ground truth.
/// Non-positive predictions are left out of the log term and count as
/// threshold failures.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, valid: Option<&ShaftMask>) -> Result<DepthMetrics> {
    check_dims(pred, gt, valid)?;
    let (mut n, mut n_log, mut hits) = (0usize, 0usize, 0usize);
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log, mut abs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, g) in valid_pairs(pred, gt, valid) {
        let e = p - g;
        n += 1;
        abs_rel += e.abs() / g;
        sq_rel += e * e / g;
        sq += e * e;
        abs += e.abs();
        if p > 0.0 {
            n_log += 1;
            sq_log += (p.ln() - g.ln()).powi(2);
            if (p / g).max(g / p) < DELTA_THRESHOLD {
                hits += 1;
            }
        }
    }
    if n == 0 {
        return Err(EvalError::NoValidPixels);
    }
    let nf = n as f64;
    let rmse_log = if n_log > 0 { (sq_log / n_log as f64).sqrt() } else { f64::INFINITY };
    Ok(DepthMetrics {
        abs_rel: abs_rel / nf,
        sq_rel: sq_rel / nf,
        rmse: (sq / nf).sqrt(),
        rmse_log,
        mae: abs / nf,
        delta_125: hits as f64 / nf,
        n_pixels: n,
    })
}

/// Fraction of valid pixels with `max(p/g, g/p) < threshold`.
pub fn delta_accuracy(pred: &DepthMap, gt: &DepthMap, valid: Option<&ShaftMask>, threshold: f64) -> Result<f64> {
    check_dims(pred, gt, valid)?;
    let (mut n, mut hits) = (0usize, 0usize);
    for (p, g) in valid_pairs(pred, gt, valid) {
        n += 1;
        if p > 0.0 && (p / g).max(g / p) < threshold {
            hits += 1;
        }
    }
    if n == 0 {
        return Err(EvalError::NoValidPixels);
    }
    Ok(hits as f64 / n as f64)
}

/// `median(gt) / median(pred)` over pixels where both are positive.
pub fn median_scale_factor(pred: &DepthMap, gt: &DepthMap, valid: Option<&ShaftMask>) -> Result<f64> {
    check_dims(pred, gt, valid)?;
    let (mut ps, mut gs): (Vec<f64>, Vec<f64>) = valid_pairs(pred, gt, valid).filter(|(p, _)| *p > 0.0).unzip();
    if ps.is_empty() {
        return Err(EvalError::NoValidPixels);
    }
    let mp = median_in_place(&mut ps).unwrap_or(0.0);
    let mg = median_in_place(&mut gs).unwrap_or(0.0);
    if !(mp > 0.0) || !(mg > 0.0) {
        return Err(EvalError::ZeroMedian);
    }
    Ok(mg / mp)
}

/// `pred` multiplied by `factor`, unit unchanged.
pub fn rescale(pred: &DepthMap, factor: f64) -> DepthMap {
    let values = pred.values().iter().map(|v| v * factor).collect();
    DepthMap::new(pred.width(), pred.height(), values, pred.unit()).expect("positive factor keeps values valid")
}

/// Angle between two directions projected onto a camera plane, as undirected
/// lines in degrees; 0 when either projection vanishes.
fn projected_angle_deg(a: (f64, f64), b: (f64, f64)) -> f64 {
    let na = a.0.hypot(a.1);
    let nb = b.0.hypot(b.1);
    if na < 1e-9 || nb < 1e-9 {
        return 0.0;
    }
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    let theta = cross.abs().atan2(dot).to_degrees();
    theta.min(180.0 - theta)
}

/// Orientation errors per camera plane (about X: Y–Z plane, about Y: X–Z
/// plane) and componentwise tip errors.
pub fn pose_errors(est: &ToolPose, gt: &ToolPose) -> PoseErrors {
    let se: Vector3 = est.axis().direction();
    let sg: Vector3 = gt.axis().direction();
    let dt = est.tip() - gt.tip();
    PoseErrors {
        ori_x_deg: projected_angle_deg((se.y, se.z), (sg.y, sg.z)),
        ori_y_deg: projected_angle_deg((se.x, se.z), (sg.x, sg.z)),
        tip_x_mm: dt.x.abs(),
        tip_y_mm: dt.y.abs(),
        tip_z_mm: dt.z.abs(),
    }
}

/// Records whose named scalar fields can be summarized.
pub trait Fields {
    fn fields(&self) -> Vec<(&'static str, f64)>;
}

impl Fields for DepthMetrics {
    fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("abs_rel", self.abs_rel),
            ("sq_rel", self.sq_rel),
            ("rmse", self.rmse),
            ("rmse_log", self.rmse_log),
            ("mae", self.mae),
            ("delta_125", self.delta_125),
        ]
    }
}

impl Fields for PoseErrors {
    fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("ori_x_deg", self.ori_x_deg),
            ("ori_y_deg", self.ori_y_deg),
            ("tip_x_mm", self.tip_x_mm),
            ("tip_y_mm", self.tip_y_mm),
            ("tip_z_mm", self.tip_z_mm),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub fields: Vec<FieldSummary>,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<&FieldSummary> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Per-field mean and population standard deviation.
pub fn aggregate<T: Fields>(items: &[T]) -> Result<Summary> {
    let first = items.first().ok_or(EvalError::EmptyList)?;
    let names: Vec<_> = first.fields().into_iter().map(|(n, _)| n).collect();
    let rows: Vec<Vec<f64>> = items.iter().map(|it| it.fields().into_iter().map(|(_, v)| v).collect()).collect();
    let fields = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (mean, std) = mean_std(&col).expect("non-empty");
            FieldSummary { name: name.to_string(), mean, std }
        })
        .collect();
    Ok(Summary { count: items.len(), fields })
}
