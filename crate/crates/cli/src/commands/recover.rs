use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use endoscale::evaluation::depth_metrics;
use endoscale::pose::ShaftObservation;
use endoscale::raster::{DepthMap, DepthUnit};
use endoscale::scale::{apply_scale, recover_frame, recover_from_observation, FrameRejected, RecoveryConfig, RejectReason, ScaleParams};

use super::synth::MANIFEST_SCHEMA;
use super::{create_dir, data_err, ensure_distinct, list_frames};
use crate::cli::RecoverArgs;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::formats::{read_pfm, read_pgm, write_pfm};
use crate::records::{to_line, read_jsonl, write_jsonl, FrameRecord, Header, ManifestEntry, Outcome, PoseRecord, Rejection};

pub const RECORD_SCHEMA: &str = "endoscale.frame-record";

struct FrameInput {
    id: String,
    relative: PathBuf,
    mask: PathBuf,
    gt: Option<PathBuf>,
    output: PathBuf,
}

/// Result of the per-frame stages before any fallback is applied.
enum Stage {
    Done { depth: DepthMap, scale: ScaleParams, pose: PoseRecord, clamped: usize },
    Rejected { relative: DepthMap, reason: RejectReason },
}

pub fn run(cfg: &PipelineConfig, args: &RecoverArgs) -> Result<()> {
    let (frames, records_path) = collect_inputs(cfg, args)?;
    let observations = match &args.observations {
        Some(p) => load_observations(p)?,
        None => BTreeMap::new(),
    };
    let fallback = args.fallback_scale || cfg.fallback_scale;
    // inputs come from f32 files
    let recovery = RecoveryConfig { round_metric_to_f32: true, ..cfg.recovery.clone() };

    let process = |f: &FrameInput| -> Result<Stage> {
        let relative = read_pfm(&f.relative, DepthUnit::Relative)?;
        let mask = read_pgm(&f.mask)?;
        let k = cfg.intrinsics_for(&f.id);
        let size_ok = !k.is_bounded() || (k.width as usize, k.height as usize) == relative.dims();
        let result = if !size_ok {
            Err(FrameRejected { reason: RejectReason::SizeMismatch })
        } else if let Some(obs) = observations.get(&f.id) {
            recover_from_observation(&relative, &mask, obs, &k, cfg.shaft_radius_mm, &recovery)
        } else {
            recover_frame(&relative, &mask, &k, cfg.shaft_radius_mm, &recovery)
        };
        Ok(match result {
            Ok(r) => Stage::Done { pose: PoseRecord::from(&r.pose), scale: r.scale, clamped: r.depth.clamped, depth: r.depth.value },
            Err(rej) => Stage::Rejected { relative, reason: rej.reason },
        })
    };

    // Fallback makes each frame depend on the previous one.
    let stages: Vec<Result<Stage>> = if fallback {
        frames.iter().map(process).collect()
    } else {
        frames.par_iter().map(process).collect()
    };

    let mut records = Vec::with_capacity(frames.len());
    let mut last_good: Option<(String, ScaleParams)> = None;
    for (f, stage) in frames.iter().zip(stages) {
        let (outcome, depth) = match stage? {
            Stage::Done { depth, scale, pose, clamped } => {
                last_good = Some((f.id.clone(), scale));
                (Outcome::Ok { scale, pose, clamped }, Some(depth))
            }
            Stage::Rejected { relative, reason } => {
                let rejection = Rejection { code: reason.code().to_string(), message: reason.to_string() };
                match (&last_good, fallback) {
                    (Some((from, scale)), true) => {
                        let d = apply_scale(&relative, scale).map_err(data_err)?;
                        let outcome = Outcome::Fallback { scale: *scale, from_frame: from.clone(), reason: rejection, clamped: d.clamped };
                        (outcome, Some(d.value))
                    }
                    _ => (Outcome::Rejected { reason: rejection }, None),
                }
            }
        };
        let mut metrics = None;
        match depth {
            Some(d) => {
                let d = d.quantized_f32();
                write_pfm(&f.output, &d)?;
                if let Some(gt_path) = &f.gt {
                    let gt = read_pfm(gt_path, DepthUnit::Millimeters)?;
                    metrics = depth_metrics(&d, &gt, None).ok();
                }
            }
            None => remove_stale(&f.output)?,
        }
        records.push(FrameRecord { frame: f.id.clone(), tool: 0, outcome, metrics });
    }

    let header = Header::new(RECORD_SCHEMA);
    match records_path {
        Some(p) => write_jsonl(&p, &header, &records)?,
        None => {
            println!("{}", to_line(&header)?);
            for r in &records {
                println!("{}", to_line(r)?);
            }
        }
    }
    Ok(())
}

fn remove_stale(path: &Path) -> Result<()> {
    match std::fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(CliError::io(path, e)),
        _ => Ok(()),
    }
}

fn collect_inputs(cfg: &PipelineConfig, args: &RecoverArgs) -> Result<(Vec<FrameInput>, Option<PathBuf>)> {
    let io = &cfg.io;
    if let (Some(rel), Some(mask)) = (&args.relative, &args.mask) {
        ensure_distinct(&[rel, mask], &args.out)?;
        let id = rel
            .file_name()
            .map(|n| n.to_string_lossy().trim_end_matches(io.relative_suffix.as_str()).to_string())
            .unwrap_or_default();
        let frame = FrameInput { id, relative: rel.clone(), mask: mask.clone(), gt: None, output: args.out.clone() };
        return Ok((vec![frame], args.records.clone()));
    }
    let input = args.input.as_ref().ok_or_else(|| CliError::Usage("either --input or --relative/--mask is required".into()))?;
    ensure_distinct(&[input], &args.out)?;
    let rels = list_frames(input, &io.relative_suffix)?;
    let masks = list_frames(input, &io.mask_suffix)?;
    let gts = list_frames(input, &io.gt_suffix)?;
    if rels.is_empty() {
        return Err(CliError::data(format!("no *{} files in {}", io.relative_suffix, input.display())));
    }
    create_dir(&args.out)?;
    let mut frames = Vec::with_capacity(rels.len());
    for (id, rel) in rels {
        let mask = masks.get(&id).ok_or_else(|| CliError::data(format!("frame {id} has no mask")))?;
        frames.push(FrameInput {
            output: args.out.join(format!("{id}{}", io.absolute_suffix)),
            gt: gts.get(&id).cloned(),
            relative: rel,
            mask: mask.clone(),
            id,
        });
    }
    let records = args.records.clone().unwrap_or_else(|| args.out.join(&io.records));
    Ok((frames, Some(records)))
}

fn load_observations(path: &Path) -> Result<BTreeMap<String, ShaftObservation>> {
    let entries: Vec<ManifestEntry> = read_jsonl(path, MANIFEST_SCHEMA)?;
    entries
        .into_iter()
        .map(|e| {
            let obs = e.observation.to_observation().map_err(|m| CliError::data(format!("{}: frame {}: {m}", path.display(), e.frame)))?;
            Ok((e.frame, obs))
        })
        .collect()
}
