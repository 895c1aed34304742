use rayon::prelude::*;

use endoscale::synthetic::{analytic_observation, make_relative_with, render, trial_rng};

use super::{create_dir, data_err};
use crate::cli::SynthArgs;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::formats::{write_pfm, write_pgm};
use crate::records::{write_jsonl, Header, ManifestEntry, ObservationRecord, PoseRecord};

pub const MANIFEST_SCHEMA: &str = "endoscale.manifest";

pub fn frame_id(i: usize) -> String {
    format!("frame_{i:04}")
}

pub fn run(cfg: &PipelineConfig, args: &SynthArgs) -> Result<()> {
    create_dir(&args.out)?;
    let frames = args.frames.unwrap_or(cfg.synth.frames);
    let dist = cfg.scene_distribution();
    let (w, h) = (cfg.intrinsics.width as usize, cfg.intrinsics.height as usize);
    let affine = cfg.synth.affine;
    let io = &cfg.io;

    let entries: Vec<Result<ManifestEntry>> = (0..frames)
        .into_par_iter()
        .map(|i| {
            let id = frame_id(i);
            let mut rng = trial_rng(cfg.seed, i as u64);
            let mut scene = dist.sample(&mut rng).map_err(data_err)?;
            scene.seed = cfg.seed;
            let (gt, mask) = render(&scene, w, h).map_err(data_err)?;
            let gt = gt.quantized_f32();
            let rel = make_relative_with(&gt, affine.eta, affine.gamma, &cfg.synth.noise, &mut rng).map_err(data_err)?;
            let rel = rel.value.quantized_f32();
            write_pfm(&args.out.join(format!("{id}{}", io.gt_suffix)), &gt)?;
            write_pfm(&args.out.join(format!("{id}{}", io.relative_suffix)), &rel)?;
            write_pgm(&args.out.join(format!("{id}{}", io.mask_suffix)), &mask)?;
            let pose = scene.pose().map_err(data_err)?;
            let obs = analytic_observation(&scene).map_err(data_err)?;
            Ok(ManifestEntry {
                frame: id,
                pose: PoseRecord::from(&pose),
                observation: ObservationRecord::from(&obs),
                eta: affine.eta,
                gamma: affine.gamma,
                scene,
            })
        })
        .collect();
    let entries: Vec<ManifestEntry> = entries.into_iter().collect::<Result<_>>()?;
    let header = Header::new(MANIFEST_SCHEMA).with_note("camera frame, millimetres; relative = eta * gt + gamma");
    write_jsonl(&args.out.join(&io.manifest), &header, &entries)?;
    eprintln!("wrote {} frames to {}", entries.len(), args.out.display());
    Ok(())
}
