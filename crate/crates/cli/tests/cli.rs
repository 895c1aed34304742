use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use endoscale::raster::{DepthMap, DepthUnit, ShaftMask};
use endoscale::synthetic::render;
use endoscale_cli::formats::{read_pfm, write_pfm, write_pgm};
use endoscale_cli::records::{read_jsonl, ManifestEntry, PoseRecord};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_endoscale"));
    c.env_remove("ENDOSCALE_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn synth(dir: &Path, frames: usize, extra: &[&str]) -> PathBuf {
    let data = dir.join("data");
    let n = frames.to_string();
    let mut args = vec!["synth", "--out", p(&data), "--frames", &n];
    args.extend_from_slice(extra);
    ok(&args);
    data
}

#[test]
fn synth_manifest_and_maps_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 5, &["--seed", "11"]);
    let entries: Vec<ManifestEntry> = read_jsonl(&data.join("manifest.jsonl"), "endoscale.manifest").unwrap();
    assert_eq!(entries.len(), 5);
    for e in &entries {
        let pose = e.scene.pose().unwrap();
        assert_eq!(PoseRecord::from(&pose), e.pose);
        let (gt, mask) = render(&e.scene, 640, 512).unwrap();
        let gt = gt.quantized_f32();
        let read = read_pfm(&data.join(format!("{}_gt.pfm", e.frame)), DepthUnit::Millimeters).unwrap();
        assert_eq!(read.values(), gt.values());
        let read_mask = endoscale_cli::formats::read_pgm(&data.join(format!("{}_mask_tool0.pgm", e.frame))).unwrap();
        assert_eq!(read_mask, mask);
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), 4, &["--seed", "3", "--jobs", "1"]);
    synth(b.path(), 4, &["--seed", "3", "--jobs", "4"]);
    assert_eq!(dir_bytes(&a.path().join("data")), dir_bytes(&b.path().join("data")));
}

fn constant(w: usize, h: usize, v: f64) -> DepthMap {
    DepthMap::filled(w, h, v, DepthUnit::Relative).unwrap()
}

#[test]
fn fuse_constant_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let (low, high, out) = (tmp.path().join("low.pfm"), tmp.path().join("high.pfm"), tmp.path().join("fused.pfm"));
    write_pfm(&low, &constant(320, 256, 2.5)).unwrap();
    write_pfm(&high, &constant(480, 384, 2.5)).unwrap();
    ok(&["fuse", "--low", p(&low), "--high", p(&high), "--out", p(&out)]);
    let fused = read_pfm(&out, DepthUnit::Relative).unwrap();
    assert_eq!(fused.dims(), (480, 384));
    assert!(fused.values().iter().all(|v| *v == 2.5));
}

#[test]
fn fuse_rejects_swapped_resolutions_and_missing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (low, high, out) = (tmp.path().join("low.pfm"), tmp.path().join("high.pfm"), tmp.path().join("fused.pfm"));
    write_pfm(&low, &constant(480, 384, 1.0)).unwrap();
    write_pfm(&high, &constant(320, 256, 1.0)).unwrap();
    let r = run(&["fuse", "--low", p(&low), "--high", p(&high), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("InvalidSize"));
    assert!(!out.exists());

    let missing = tmp.path().join("nope.pfm");
    let r = run(&["fuse", "--low", p(&missing), "--high", p(&high), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("IoError"));
}

#[test]
fn recover_noise_free_frames_match_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 10, &["--seed", "5"]);
    let out = tmp.path().join("rec");
    ok(&["recover", "--input", p(&data), "--out", p(&out), "--observations", p(&data.join("manifest.jsonl"))]);
    for i in 0..10 {
        let gt = read_pfm(&data.join(format!("frame_{i:04}_gt.pfm")), DepthUnit::Millimeters).unwrap();
        let rec = read_pfm(&out.join(format!("frame_{i:04}_absolute.pfm")), DepthUnit::Millimeters).unwrap();
        let max = gt.values().iter().zip(rec.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max < 1e-5, "frame {i}: {max}");
    }
    let records = jsonl(&out.join("records.jsonl"));
    assert_eq!(records[0]["schema"], "endoscale.frame-record");
    assert!(records[1..].iter().all(|r| r["status"] == "ok" && r["metrics"]["abs_rel"].as_f64().unwrap() < 1e-7));
}

#[test]
fn recover_from_masks_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 3, &["--seed", "5"]);
    let out = tmp.path().join("rec");
    ok(&["recover", "--input", p(&data), "--out", p(&out)]);
    for r in &jsonl(&out.join("records.jsonl"))[1..] {
        assert_eq!(r["status"], "ok", "{r}");
        // rasterized boundaries limit accuracy to about a percent
        assert!(r["metrics"]["abs_rel"].as_f64().unwrap() < 0.05, "{r}");
    }
}

fn tiny_mask_frame(dir: &Path, id: &str, like: &Path) {
    let rel = read_pfm(&like.join("frame_0000_relative.pfm"), DepthUnit::Relative).unwrap();
    write_pfm(&dir.join(format!("{id}_relative.pfm")), &rel).unwrap();
    let mask = ShaftMask::from_fn(640, 512, |x, y| (100..110).contains(&x) && (100..105).contains(&y)).unwrap();
    write_pgm(&dir.join(format!("{id}_mask_tool0.pgm")), &mask).unwrap();
}

#[test]
fn rejected_frame_has_reason_and_no_depth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 1, &[]);
    let input = tmp.path().join("in");
    fs::create_dir(&input).unwrap();
    tiny_mask_frame(&input, "frame_0000", &data);
    let out = tmp.path().join("rec");
    let r = ok(&["recover", "--input", p(&input), "--out", p(&out)]);
    assert!(r.status.success());
    let recs = jsonl(&out.join("records.jsonl"));
    assert_eq!(recs[1]["status"], "rejected");
    assert_eq!(recs[1]["reason"]["code"], "MaskTooSmall");
    assert!(!out.join("frame_0000_absolute.pfm").exists());
}

#[test]
fn fallback_reuses_previous_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 2, &["--seed", "8"]);
    let input = tmp.path().join("in");
    fs::create_dir(&input).unwrap();
    for suffix in ["_relative.pfm", "_mask_tool0.pgm"] {
        fs::copy(data.join(format!("frame_0000{suffix}")), input.join(format!("frame_0001{suffix}"))).unwrap();
    }
    tiny_mask_frame(&input, "frame_0002", &data);
    let out = tmp.path().join("rec");
    ok(&["recover", "--input", p(&input), "--out", p(&out), "--fallback-scale"]);
    let recs = jsonl(&out.join("records.jsonl"));
    assert_eq!(recs[1]["status"], "ok");
    assert_eq!(recs[2]["status"], "fallback");
    assert_eq!(recs[2]["from_frame"], "frame_0001");
    assert_eq!(recs[2]["reason"]["code"], "MaskTooSmall");
    assert_eq!(recs[2]["scale"], recs[1]["scale"]);
    assert!(out.join("frame_0002_absolute.pfm").exists());
}

#[test]
fn single_frame_recover_prints_record() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 1, &[]);
    let out = tmp.path().join("abs.pfm");
    let r = ok(&[
        "recover",
        "--relative",
        p(&data.join("frame_0000_relative.pfm")),
        "--mask",
        p(&data.join("frame_0000_mask_tool0.pgm")),
        "--out",
        p(&out),
    ]);
    let text = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[1]["frame"], "frame_0000");
    assert_eq!(lines[1]["status"], "ok");
    assert!(out.exists());
}

fn write_pair(pred_dir: &Path, gt_dir: &Path, id: &str, pred: &[f64], gt: &[f64]) {
    let mm = |v: &[f64]| DepthMap::new(v.len(), 1, v.to_vec(), DepthUnit::Millimeters).unwrap();
    write_pfm(&pred_dir.join(format!("{id}_absolute.pfm")), &mm(pred)).unwrap();
    write_pfm(&gt_dir.join(format!("{id}_gt.pfm")), &mm(gt)).unwrap();
}

fn eval_summary(pred: &Path, gt: &Path, out: &Path) -> (Vec<Value>, Value) {
    ok(&["eval", "--pred", p(pred), "--gt", p(gt), "--out", p(out)]);
    let mut lines = jsonl(&out.join("report.jsonl"));
    let summary = lines.pop().unwrap();
    (lines, summary)
}

#[test]
fn eval_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir(&pred).unwrap();
    fs::create_dir(&gt).unwrap();
    write_pair(&pred, &gt, "a", &[2.0, 2.0], &[1.0, 2.0]);
    let (lines, _) = eval_summary(&pred, &gt, &tmp.path().join("r1"));
    let raw = &lines[1]["raw"];
    assert_eq!(raw["abs_rel"], 0.5);
    assert_eq!(raw["rmse"].as_f64().unwrap(), 0.5f64.sqrt());
    assert_eq!(raw["rmse_log"].as_f64().unwrap(), (2f64.ln().powi(2) / 2.0).sqrt());
    assert_eq!(raw["delta_125"], 0.5);

    write_pair(&pred, &gt, "a", &[1.0, 2.0, 4.0], &[2.0, 4.0, 8.0]);
    let (lines, summary) = eval_summary(&pred, &gt, &tmp.path().join("r2"));
    assert_eq!(lines[1]["scale_factor"], 2.0);
    assert_eq!(lines[1]["raw"]["abs_rel"], 0.5);
    assert_eq!(lines[1]["rescaled"]["abs_rel"], 0.0);
    assert_eq!(summary["frames"], 1);

    write_pair(&pred, &gt, "a", &[3.0, 5.0], &[3.0, 5.0]);
    let (lines, _) = eval_summary(&pred, &gt, &tmp.path().join("r3"));
    assert_eq!(lines[1]["raw"]["mae"], 0.0);
    assert_eq!(lines[1]["raw"]["delta_125"], 1.0);
    assert_eq!(lines[1]["scale_factor"], 1.0);
}

#[test]
fn eval_rejects_mismatched_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir(&pred).unwrap();
    fs::create_dir(&gt).unwrap();
    write_pair(&pred, &gt, "a", &[1.0], &[1.0]);
    write_pair(&tmp.path().join("gt"), &gt, "b", &[1.0], &[1.0]);
    fs::remove_file(gt.join("b_absolute.pfm")).unwrap();
    let r = run(&["eval", "--pred", p(&pred), "--gt", p(&gt)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("MismatchedFrameSets"));
}

#[test]
fn pose_bench_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pb");
    let r = ok(&["pose-bench", "--noise-free", "--trials", "50", "--out", p(&out)]);
    let table = String::from_utf8(r.stdout).unwrap();
    assert!(table.starts_with("Ori X (deg) | Ori Y (deg) | Tip X (mm) | Tip Y (mm) | Tip Z (mm)"));
    let summary = jsonl(&out.join("pose_bench.jsonl")).pop().unwrap();
    assert_eq!(summary["rejected"], 0);
    for f in summary["summary"]["fields"].as_array().unwrap() {
        assert!(f["mean"].as_f64().unwrap() < 1e-6, "{f}");
    }
}

#[test]
fn pose_bench_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["pose-bench", "--trials", "60", "--seed", "4", "--jobs", "1", "--out", p(&a)]);
    ok(&["pose-bench", "--trials", "60", "--seed", "4", "--jobs", "3", "--out", p(&b)]);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn exit_codes_and_config_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "shaft_radius_mm = -2.0\n").unwrap();
    let r = run(&["--config", p(&bad), "pose-bench", "--trials", "1"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("ConfigError"));

    let good = tmp.path().join("good.toml");
    fs::write(&good, "[pose_bench]\ntrials = 3\n").unwrap();
    let r = bin().env("ENDOSCALE_CONFIG", &good).args(["pose-bench", "--noise-free"]).output().unwrap();
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("trials: 3,"));
}
