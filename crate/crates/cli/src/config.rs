//! Pipeline configuration (TOML). Every field has a default, so an empty file
//! is a valid configuration.

use std::collections::BTreeMap;
use std::path::Path;

use endoscale::fusion::FusionConfig;
use endoscale::geometry::CameraIntrinsics;
use endoscale::scale::RecoveryConfig;
use endoscale::synthetic::{AffineDistortion, NoiseSpec, SceneDistribution, DEFAULT_RADIUS_MM};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub shaft_radius_mm: f64,
    /// Reuse the last good frame's scale when a frame is rejected.
    pub fallback_scale: bool,
    pub intrinsics: CameraIntrinsics,
    /// Per-frame intrinsics keyed by frame id.
    pub intrinsics_overrides: BTreeMap<String, CameraIntrinsics>,
    pub fusion: FusionConfig,
    pub recovery: RecoveryConfig,
    pub io: IoConfig,
    pub synth: SynthConfig,
    pub pose_bench: PoseBenchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            shaft_radius_mm: DEFAULT_RADIUS_MM,
            fallback_scale: false,
            intrinsics: CameraIntrinsics::new(500.0, 500.0, 320.0, 256.0, 640, 512).expect("valid default intrinsics"),
            intrinsics_overrides: BTreeMap::new(),
            fusion: FusionConfig::default(),
            recovery: RecoveryConfig::default(),
            io: IoConfig::default(),
            synth: SynthConfig::default(),
            pose_bench: PoseBenchConfig::default(),
        }
    }
}

/// File name patterns: `<frame id><suffix>` inside a directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub relative_suffix: String,
    pub mask_suffix: String,
    pub gt_suffix: String,
    pub absolute_suffix: String,
    pub manifest: String,
    pub records: String,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            relative_suffix: "_relative.pfm".into(),
            mask_suffix: "_mask_tool0.pgm".into(),
            gt_suffix: "_gt.pfm".into(),
            absolute_suffix: "_absolute.pfm".into(),
            manifest: "manifest.jsonl".into(),
            records: "records.jsonl".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub frames: usize,
    pub depth_range: (f64, f64),
    pub length: f64,
    pub background_z: f64,
    pub max_axial_cos: f64,
    pub tip_margin: f64,
    pub affine: AffineDistortion,
    pub noise: NoiseSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = SceneDistribution::default();
        Self {
            frames: 5,
            depth_range: d.depth_range,
            length: d.length,
            background_z: d.background_z,
            max_axial_cos: d.max_axial_cos,
            tip_margin: d.tip_margin,
            affine: AffineDistortion::default(),
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseBenchConfig {
    pub trials: usize,
    pub noise: NoiseSpec,
}

impl Default for PoseBenchConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            noise: NoiseSpec { boundary_angle_deg: 0.1, boundary_offset_px: 1.0, tip_px_sigma: 1.0, ..Default::default() },
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: Self = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shaft_radius_mm > 0.0) || !self.shaft_radius_mm.is_finite() {
            return Err(CliError::config("shaft_radius_mm must be positive"));
        }
        self.intrinsics.validate().map_err(|e| CliError::config(format!("intrinsics: {e}")))?;
        for (id, k) in &self.intrinsics_overrides {
            k.validate().map_err(|e| CliError::config(format!("intrinsics for {id}: {e}")))?;
        }
        self.fusion.validate().map_err(|e| CliError::config(format!("fusion: {e}")))?;
        if !(self.recovery.stride >= 1.0) || self.recovery.min_samples < 2 {
            return Err(CliError::config("recovery: stride must be >= 1 and min_samples >= 2"));
        }
        self.synth.noise.validate().map_err(|e| CliError::config(format!("synth.noise: {e}")))?;
        self.pose_bench.noise.validate().map_err(|e| CliError::config(format!("pose_bench.noise: {e}")))?;
        let (lo, hi) = self.synth.depth_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(CliError::config("synth.depth_range must be positive and ordered"));
        }
        let io = &self.io;
        let suffixes = [&io.relative_suffix, &io.mask_suffix, &io.gt_suffix, &io.absolute_suffix, &io.manifest, &io.records];
        for (i, a) in suffixes.iter().enumerate() {
            if a.is_empty() || suffixes[..i].contains(a) {
                return Err(CliError::config("io names must be non-empty and distinct"));
            }
        }
        Ok(())
    }

    /// Intrinsics of a frame, honouring overrides.
    pub fn intrinsics_for(&self, frame: &str) -> CameraIntrinsics {
        self.intrinsics_overrides.get(frame).copied().unwrap_or(self.intrinsics)
    }

    /// Multiplies every intrinsic matrix (and image size) by `factor`.
    pub fn scale_intrinsics(&mut self, factor: f64) -> Result<()> {
        let scale = |k: &CameraIntrinsics| k.scaled_by(factor).map_err(|e| CliError::config(format!("--intrinsics-scale: {e}")));
        self.intrinsics = scale(&self.intrinsics)?;
        for k in self.intrinsics_overrides.values_mut() {
            *k = scale(k)?;
        }
        Ok(())
    }

    pub fn scene_distribution(&self) -> SceneDistribution {
        let s = &self.synth;
        SceneDistribution {
            intrinsics: self.intrinsics,
            depth_range: s.depth_range,
            radius: self.shaft_radius_mm,
            length: s.length,
            background_z: s.background_z,
            max_axial_cos: s.max_axial_cos,
            tip_margin: s.tip_margin,
        }
    }
}
