use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use endoscale::evaluation::{aggregate, PoseErrors, Summary};
use endoscale::synthetic::{pose_trial, NoiseSpec, TrialOutcome};

use super::{create_dir, data_err};
use crate::cli::PoseBenchArgs;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::formats::write_bytes;
use crate::records::{to_line, Header};

pub const BENCH_SCHEMA: &str = "endoscale.pose-bench";

pub const COLUMNS: [&str; 5] = ["Ori X (deg)", "Ori Y (deg)", "Tip X (mm)", "Tip Y (mm)", "Tip Z (mm)"];

#[derive(Debug, Serialize)]
struct TrialRecord {
    trial: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<PoseErrors>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejected: Option<String>,
}

#[derive(Debug, Serialize)]
struct BenchSummary {
    trials: usize,
    rejected: usize,
    noise: NoiseSpec,
    seed: u64,
    columns: Vec<String>,
    summary: Summary,
}

pub fn run(cfg: &PipelineConfig, args: &PoseBenchArgs) -> Result<()> {
    let trials = args.trials.unwrap_or(cfg.pose_bench.trials);
    let noise = if args.noise_free { NoiseSpec::default() } else { cfg.pose_bench.noise };
    let dist = cfg.scene_distribution();
    let outcomes: Vec<_> = (0..trials).into_par_iter().map(|i| pose_trial(&dist, &noise, cfg.seed, i as u64)).collect();

    let mut records = Vec::with_capacity(trials);
    let mut errors = Vec::with_capacity(trials);
    for (i, o) in outcomes.into_iter().enumerate() {
        match o.map_err(data_err)? {
            TrialOutcome::Ok(e) => {
                errors.push(e);
                records.push(TrialRecord { trial: i, errors: Some(e), rejected: None });
            }
            TrialOutcome::Rejected(why) => records.push(TrialRecord { trial: i, errors: None, rejected: Some(why) }),
        }
    }
    let summary = aggregate(&errors).map_err(data_err)?;
    let bench = BenchSummary {
        trials,
        rejected: trials - errors.len(),
        noise,
        seed: cfg.seed,
        columns: COLUMNS.iter().map(|c| c.to_string()).collect(),
        summary,
    };
    let table = render_table(&bench);
    print!("{table}");
    if let Some(out) = &args.out {
        create_dir(out)?;
        let header = Header::new(BENCH_SCHEMA).with_note("std is the population standard deviation");
        let mut text = to_line(&header)? + "\n";
        for r in &records {
            text += &(to_line(r)? + "\n");
        }
        text += &(to_line(&bench)? + "\n");
        write_bytes(&out.join("pose_bench.jsonl"), text.as_bytes())?;
        write_bytes(&out.join("pose_bench.txt"), table.as_bytes())?;
    }
    Ok(())
}

fn render_table(b: &BenchSummary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "{}", COLUMNS.join(" | "));
    let cells: Vec<String> = b.summary.fields.iter().map(|f| format!("{:.3} ± {:.3}", f.mean, f.std)).collect();
    let _ = writeln!(t, "{}", cells.join(" | "));
    let _ = writeln!(t, "trials: {}, rejected: {}", b.trials, b.rejected);
    t
}
