mod common;

use common::direction;
use endoscale::evaluation::*;
use endoscale::geometry::{CylinderAxis, Point3};
use endoscale::pose::ToolPose;
use endoscale::raster::{DepthMap, DepthUnit};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mm(v: Vec<f64>) -> DepthMap {
    DepthMap::new(v.len(), 1, v, DepthUnit::Millimeters).unwrap()
}

fn pair(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..150.0)).collect();
    let pred = gt.iter().map(|g| g * rng.random_range(0.6..1.6)).collect();
    (pred, gt)
}

// Direct per-pixel formulas.
fn oracle(pred: &[f64], gt: &[f64]) -> (f64, f64, f64, f64, f64, f64) {
    let n = gt.len() as f64;
    let s = |f: &dyn Fn(f64, f64) -> f64| pred.iter().zip(gt).map(|(p, g)| f(*p, *g)).sum::<f64>() / n;
    (
        s(&|p, g| (p - g).abs() / g),
        s(&|p, g| (p - g).powi(2) / g),
        s(&|p, g| (p - g).powi(2)).sqrt(),
        s(&|p, g| (p.ln() - g.ln()).powi(2)).sqrt(),
        s(&|p, g| (p - g).abs()),
        s(&|p, g| if (p / g).max(g / p) < 1.25 { 1.0 } else { 0.0 }),
    )
}

proptest! {
    #[test]
    fn matches_direct_formulas(seed in 0u64..10_000, n in 1usize..300) {
        let (p, g) = pair(seed, n);
        let m = depth_metrics(&mm(p.clone()), &mm(g.clone()), None).unwrap();
        let o = oracle(&p, &g);
        prop_assert!((m.abs_rel - o.0).abs() < 1e-12);
        prop_assert!((m.sq_rel - o.1).abs() < 1e-10);
        prop_assert!((m.rmse - o.2).abs() < 1e-10);
        prop_assert!((m.rmse_log - o.3).abs() < 1e-12);
        prop_assert!((m.mae - o.4).abs() < 1e-10);
        prop_assert_eq!(m.delta_125, o.5);
        prop_assert_eq!(m.n_pixels, n);
    }

    #[test]
    fn permutation_invariant(seed in 0u64..10_000, n in 2usize..200) {
        let (p, g) = pair(seed, n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 1));
        let a = depth_metrics(&mm(p.clone()), &mm(g.clone()), None).unwrap();
        let b = depth_metrics(&mm(idx.iter().map(|i| p[*i]).collect()), &mm(idx.iter().map(|i| g[*i]).collect()), None).unwrap();
        prop_assert!((a.abs_rel - b.abs_rel).abs() < 1e-12);
        prop_assert!((a.rmse - b.rmse).abs() < 1e-9);
        prop_assert_eq!(a.delta_125, b.delta_125);
    }

    #[test]
    fn delta_monotone_in_threshold(seed in 0u64..10_000, n in 1usize..200) {
        let (p, g) = pair(seed, n);
        let (p, g) = (mm(p), mm(g));
        let d: Vec<f64> = [1.25, 1.25f64.powi(2), 1.25f64.powi(3)].iter().map(|t| delta_accuracy(&p, &g, None, *t).unwrap()).collect();
        prop_assert!(d[0] <= d[1] && d[1] <= d[2]);
    }

    #[test]
    fn median_scaling_removes_global_scale(seed in 0u64..10_000, n in 1usize..200, c in 0.1..10.0f64) {
        let (_, g) = pair(seed, n);
        let pred = mm(g.iter().map(|v| c * v).collect());
        let gt = mm(g);
        let f = median_scale_factor(&pred, &gt, None).unwrap();
        let m = depth_metrics(&rescale(&pred, f), &gt, None).unwrap();
        prop_assert!(m.abs_rel < 1e-12);
        prop_assert_eq!(m.delta_125, 1.0);
    }

    #[test]
    fn pose_errors_symmetric_and_zero_on_self(
        z1 in -0.9..0.9f64, p1 in 0.0..6.28f64, z2 in -0.9..0.9f64, p2 in 0.0..6.28f64,
        t in prop::array::uniform3(-20.0..20.0f64),
    ) {
        let a = ToolPose::new(CylinderAxis::through_point(&Point3::new(0.0, 0.0, 60.0), &direction(z1, p1), 4.5).unwrap(), Point3::new(0.0, 0.0, 60.0)).unwrap();
        let tip = Point3::new(t[0], t[1], 60.0 + t[2]);
        let b = ToolPose::new(CylinderAxis::through_point(&tip, &direction(z2, p2), 4.5).unwrap(), tip).unwrap();
        let e1 = pose_errors(&a, &b);
        let e2 = pose_errors(&b, &a);
        prop_assert!((e1.ori_x_deg - e2.ori_x_deg).abs() < 1e-9);
        prop_assert!((e1.ori_y_deg - e2.ori_y_deg).abs() < 1e-9);
        prop_assert_eq!(e1.tip_z_mm, e2.tip_z_mm);
        prop_assert!((0.0..=90.0).contains(&e1.ori_x_deg) && (0.0..=90.0).contains(&e1.ori_y_deg));
        let z = pose_errors(&a, &a);
        prop_assert!(z.ori_x_deg < 1e-6 && z.ori_y_deg < 1e-6 && z.tip_x_mm == 0.0);
    }
}

#[test]
fn non_positive_predictions_fail_delta() {
    let m = depth_metrics(&mm(vec![0.0, 2.0]), &mm(vec![1.0, 2.0]), None).unwrap();
    assert_eq!(m.delta_125, 0.5);
    assert_eq!(m.rmse_log, 0.0);
}

#[test]
fn aggregate_recomputed() {
    let frames: Vec<DepthMetrics> = (0..3)
        .map(|s| {
            let (p, g) = pair(s, 50);
            depth_metrics(&mm(p), &mm(g), None).unwrap()
        })
        .collect();
    let s = aggregate(&frames).unwrap();
    assert_eq!(s.count, 3);
    let col: Vec<f64> = frames.iter().map(|f| f.abs_rel).collect();
    let mean = col.iter().sum::<f64>() / 3.0;
    let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    let f = s.get("abs_rel").unwrap();
    assert!((f.mean - mean).abs() < 1e-12 && (f.std - std).abs() < 1e-12);
    assert!(aggregate::<DepthMetrics>(&[]).is_err());
}
