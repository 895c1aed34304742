use std::fmt::Write as _;

use endoscale::evaluation::{aggregate, depth_metrics, median_scale_factor, rescale, Summary};
use endoscale::raster::DepthUnit;
use endoscale::stats::mean_std;

use super::{create_dir, data_err, list_frames};
use crate::cli::EvalArgs;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::formats::{read_pfm, write_bytes};
use crate::records::{to_line, EvalFrameRecord, EvalSummaryRecord, Header};

pub const REPORT_SCHEMA: &str = "endoscale.depth-report";

pub fn run(cfg: &PipelineConfig, args: &EvalArgs) -> Result<()> {
    let io = &cfg.io;
    let preds = list_frames(&args.pred, &io.absolute_suffix)?;
    let gts = list_frames(&args.gt, &io.gt_suffix)?;
    if preds.is_empty() || !preds.keys().eq(gts.keys()) {
        let missing: Vec<_> = gts.keys().filter(|k| !preds.contains_key(*k)).collect();
        let extra: Vec<_> = preds.keys().filter(|k| !gts.contains_key(*k)).collect();
        return Err(CliError::data(format!("MismatchedFrameSets: missing predictions {missing:?}, no ground truth for {extra:?}")));
    }
    let mut frames = Vec::with_capacity(preds.len());
    for (id, pred_path) in &preds {
        let pred = read_pfm(pred_path, DepthUnit::Millimeters)?;
        let gt = read_pfm(&gts[id], DepthUnit::Millimeters)?;
        let raw = depth_metrics(&pred, &gt, None).map_err(data_err)?;
        let scale_factor = median_scale_factor(&pred, &gt, None).map_err(data_err)?;
        let rescaled = depth_metrics(&rescale(&pred, scale_factor), &gt, None).map_err(data_err)?;
        frames.push(EvalFrameRecord { frame: id.clone(), scale_factor, raw, rescaled });
    }
    let raw: Vec<_> = frames.iter().map(|f| f.raw).collect();
    let rescaled: Vec<_> = frames.iter().map(|f| f.rescaled).collect();
    let factors: Vec<_> = frames.iter().map(|f| f.scale_factor).collect();
    let (scale_factor_mean, scale_factor_std) = mean_std(&factors).expect("non-empty");
    let summary = EvalSummaryRecord {
        summary: "mean ± population std over frames".into(),
        frames: frames.len(),
        scale_factor_mean,
        scale_factor_std,
        raw: aggregate(&raw).map_err(data_err)?,
        rescaled: aggregate(&rescaled).map_err(data_err)?,
    };

    let table = render_table(&summary);
    print!("{table}");
    if let Some(out) = &args.out {
        create_dir(out)?;
        let header = Header::new(REPORT_SCHEMA).with_note("std is the population standard deviation");
        let mut text = to_line(&header)? + "\n";
        for f in &frames {
            text += &(to_line(f)? + "\n");
        }
        text += &(to_line(&summary)? + "\n");
        write_bytes(&out.join("report.jsonl"), text.as_bytes())?;
        write_bytes(&out.join("report.txt"), table.as_bytes())?;
    }
    Ok(())
}

fn render_table(s: &EvalSummaryRecord) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "frames: {}", s.frames);
    let _ = writeln!(t, "scale (median gt / median pred): {:.3} ± {:.3}", s.scale_factor_mean, s.scale_factor_std);
    let row = |t: &mut String, label: &str, sum: &Summary| {
        let cells: Vec<String> = sum.fields.iter().map(|f| format!("{:.4} ± {:.4}", f.mean, f.std)).collect();
        let _ = writeln!(t, "{label:<10} | {}", cells.join(" | "));
    };
    let names: Vec<&str> = s.raw.fields.iter().map(|f| f.name.as_str()).collect();
    let _ = writeln!(t, "{:<10} | {}", "variant", names.join(" | "));
    row(&mut t, "raw", &s.raw);
    row(&mut t, "rescaled", &s.rescaled);
    t
}
