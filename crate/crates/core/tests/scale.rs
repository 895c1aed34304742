mod common;

use common::*;
use endoscale::raster::{DepthMap, DepthUnit};
use endoscale::scale::*;
use endoscale::synthetic::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// Closed-form OLS through the 2x2 normal equations, uncentered.
fn normal_equations(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

fn depths(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(20.0..150.0)).collect()
}

proptest! {
    #[test]
    fn exact_affine_recovered(seed in 0u64..10_000, n in 2usize..200, eta in 0.001..10.0f64, gamma in -5.0..5.0f64) {
        let z = depths(seed, n);
        let d: Vec<f64> = z.iter().map(|v| eta * v + gamma).collect();
        let p = fit_scale(&z, &d).unwrap();
        prop_assert!((p.eta - eta).abs() <= 1e-9 * eta);
        prop_assert!((p.gamma - gamma).abs() <= 1e-9 * (gamma.abs() + eta * 150.0));
    }

    #[test]
    fn affine_equivariance(seed in 0u64..10_000, n in 3usize..100) {
        let z = depths(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let d: Vec<f64> = z.iter().map(|v| 0.04 * v + 0.3 + rng.random_range(-0.05..0.05)).collect();
        let p = fit_scale(&z, &d).unwrap();
        let d2: Vec<f64> = d.iter().map(|v| 3.0 * v - 1.0).collect();
        let q = fit_scale(&z, &d2).unwrap();
        prop_assert!((q.eta - 3.0 * p.eta).abs() < 1e-9);
        prop_assert!((q.gamma - (3.0 * p.gamma - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn matches_normal_equations(seed in 0u64..10_000, n in 3usize..300) {
        let z = depths(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let d: Vec<f64> = z.iter().map(|v| 0.02 * v - 0.2 + rng.random_range(-0.1..0.1)).collect();
        let p = fit_scale(&z, &d).unwrap();
        let (eta, gamma) = normal_equations(&z, &d);
        prop_assert!((p.eta - eta).abs() < 1e-12);
        prop_assert!((p.gamma - gamma).abs() < 1e-12 * (1.0 + gamma.abs()) * 100.0);
    }

    #[test]
    fn inversion_is_monotone(eta in 0.01..5.0f64, gamma in -1.0..1.0f64, a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let p = ScaleParams::exact(eta, gamma).unwrap();
        prop_assert_eq!(a < b, p.to_metric(a) < p.to_metric(b));
        prop_assert!((eta * p.to_metric(a) + gamma - a).abs() < 1e-9);
    }
}

#[test]
fn noisy_fit_within_three_standard_errors() {
    let (eta, gamma, sigma) = (0.04, 0.3, 0.01);
    let mut within = 0;
    for seed in 0..100 {
        let z = depths(seed, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let d: Vec<f64> = z.iter().map(|v| eta * v + gamma + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let p = fit_scale(&z, &d).unwrap();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let sxx: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
        if (p.eta - eta).abs() < 3.0 * sigma / sxx.sqrt() {
            within += 1;
        }
    }
    assert!(within >= 97, "{within}");
}

#[test]
fn more_samples_shrink_error() {
    let spread = |n: usize| {
        let errs: Vec<f64> = (0..200)
            .map(|seed| {
                let z = depths(seed, n);
                let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
                let d: Vec<f64> = z.iter().map(|v| 0.04 * v + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
                (fit_scale(&z, &d).unwrap().eta - 0.04).powi(2)
            })
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    assert!(spread(80) < spread(20));
}

#[test]
fn end_to_end_exact_on_rendered_frame() {
    let dist = SceneDistribution::default();
    let mut done = 0;
    for i in 0..10 {
        let scene = dist.sample(&mut trial_rng(3, i)).unwrap();
        let k = scene.intrinsics;
        let Ok((gt, mask)) = render(&scene, k.width as usize, k.height as usize) else { continue };
        let rel: Vec<f64> = gt.values().iter().map(|v| 0.04 * v + 0.3).collect();
        let rel = DepthMap::new(gt.width(), gt.height(), rel, DepthUnit::Relative).unwrap();
        let obs = analytic_observation(&scene).unwrap();
        let Ok(rec) = recover_from_observation(&rel, &mask, &obs, &k, scene.radius, &RecoveryConfig::default()) else { continue };
        let err = rec.depth.value.values().iter().zip(gt.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "frame {i}: {err}");
        assert!((rec.scale.eta - 0.04).abs() < 1e-9 * 0.04);
        done += 1;
    }
    assert!(done >= 8, "{done}");
}

#[test]
fn axis_depths_match_renderer() {
    let k = k500();
    // tilted away from the camera towards +u
    let scene = SceneSpec::new(k, endoscale::geometry::Point3::new(0.0, 0.0, 60.0), endoscale::geometry::Vector3::new(1.0, 0.1, 0.4), 200.0, 4.5).unwrap();
    let (gt, mask) = render(&scene, 640, 512).unwrap();
    let ls = scene.axis().unwrap().image_line(&k).unwrap();
    let px = sample_axis_pixels(&mask, &ls, 5.0).unwrap();
    let (px, z) = metric_depths_along_axis(&scene.axis().unwrap(), &k, &px).unwrap();
    assert!(px.len() >= 10);
    let mut pairs: Vec<_> = px.iter().zip(&z).collect();
    pairs.sort_by(|a, b| a.0.u.total_cmp(&b.0.u));
    assert!(pairs.windows(2).all(|w| w[1].1 > w[0].1));
    for (p, z) in px.iter().zip(&z) {
        assert!((gt.get(p.u as usize, p.v as usize) - z).abs() < 1e-6);
    }
}
