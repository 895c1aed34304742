//! Line-delimited JSON records. Every file starts with a header line naming
//! the schema and its version.

use std::path::Path;

use endoscale::evaluation::{DepthMetrics, Summary};
use endoscale::geometry::CylinderAxis;
use endoscale::pose::{ShaftObservation, ToolPose};
use endoscale::scale::ScaleParams;
use endoscale::synthetic::SceneSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::{read_bytes, write_bytes};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Header {
    pub fn new(schema: &str) -> Self {
        Self { schema: schema.into(), version: SCHEMA_VERSION, notes: Vec::new() }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Axis in Plücker form plus tip, all in camera coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub s: [f64; 3],
    pub m: [f64; 3],
    pub radius: f64,
    pub tip: [f64; 3],
}

impl From<&ToolPose> for PoseRecord {
    fn from(p: &ToolPose) -> Self {
        let a = p.axis();
        Self { s: a.direction().into(), m: a.moment().into(), radius: a.radius(), tip: p.tip().coords.into() }
    }
}

impl PoseRecord {
    pub fn to_pose(&self) -> std::result::Result<ToolPose, String> {
        let axis = CylinderAxis::from_plucker(self.s.into(), self.m.into(), self.radius).map_err(|e| e.to_string())?;
        ToolPose::new(axis, self.tip.into()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub line_minus: [f64; 3],
    pub line_plus: [f64; 3],
    pub tip: [f64; 2],
    pub interior: [f64; 2],
    pub quality: f64,
}

impl From<&ShaftObservation> for ObservationRecord {
    fn from(o: &ShaftObservation) -> Self {
        Self {
            line_minus: o.line_minus.into(),
            line_plus: o.line_plus.into(),
            tip: [o.tip.u, o.tip.v],
            interior: [o.interior.u, o.interior.v],
            quality: o.quality,
        }
    }
}

impl ObservationRecord {
    pub fn to_observation(&self) -> std::result::Result<ShaftObservation, String> {
        use endoscale::geometry::{ImageLine, Pixel};
        let line = |c: [f64; 3]| ImageLine::try_from(c).map_err(|e| e.to_string());
        Ok(ShaftObservation {
            line_minus: line(self.line_minus)?,
            line_plus: line(self.line_plus)?,
            tip: Pixel::new(self.tip[0], self.tip[1]),
            interior: Pixel::new(self.interior[0], self.interior[1]),
            quality: self.quality,
        })
    }
}

/// One synthetic frame in the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame: String,
    pub scene: SceneSpec,
    pub pose: PoseRecord,
    pub eta: f64,
    pub gamma: f64,
    pub observation: ObservationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok {
        scale: ScaleParams,
        pose: PoseRecord,
        clamped: usize,
    },
    /// Rejected, but depth was produced with an earlier frame's scale.
    Fallback {
        scale: ScaleParams,
        from_frame: String,
        reason: Rejection,
        clamped: usize,
    },
    Rejected {
        reason: Rejection,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: String,
    pub tool: u32,
    #[serde(flatten)]
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<DepthMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFrameRecord {
    pub frame: String,
    pub scale_factor: f64,
    pub raw: DepthMetrics,
    pub rescaled: DepthMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummaryRecord {
    pub summary: String,
    pub frames: usize,
    pub scale_factor_mean: f64,
    pub scale_factor_std: f64,
    pub raw: Summary,
    pub rescaled: Summary,
}

pub fn to_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| CliError::Internal(e.to_string()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, header: &Header, items: &[T]) -> Result<()> {
    let mut text = to_line(header)? + "\n";
    for it in items {
        text += &to_line(it)?;
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

/// Reads a record file, checking the header's schema name and version.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::data(format!("{}: not UTF-8", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |m: String| CliError::data(format!("{}: {m}", path.display()));
    let header: Header = serde_json::from_str(lines.next().ok_or_else(|| bad("empty file".into()))?).map_err(|e| bad(e.to_string()))?;
    if header.schema != schema || header.version != SCHEMA_VERSION {
        return Err(bad(format!("expected schema {schema} v{SCHEMA_VERSION}, found {} v{}", header.schema, header.version)));
    }
    lines.map(|l| serde_json::from_str(l).map_err(|e| bad(e.to_string()))).collect()
}
