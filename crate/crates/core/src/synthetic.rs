//! Synthetic shafts over a planar background: exact depth, masks, silhouettes
//! and affinely distorted relative depth, with seeded noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{median_scale_factor, pose_errors, PoseErrors};
use crate::geometry::{CameraIntrinsics, CylinderAxis, GeometryError, ImageLine, Pixel, Point3, Vector3};
use crate::pose::{estimate_pose_with_fallback, label_lines, PoseError, ShaftObservation, ToolPose};
use crate::raster::{Clamped, DepthMap, DepthUnit, RasterError, ShaftMask};
use crate::scale::{recover_from_observation, RecoveryConfig, ETA_TOL};

pub const DEFAULT_RADIUS_MM: f64 = 4.5;
pub const DEFAULT_BACKGROUND_MM: f64 = 150.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(&'static str),
    #[error("the shaft is not visible in the image")]
    EmptyFrustum,
    #[error("gain is zero")]
    ZeroEta,
    #[error("noise parameters must be finite and non-negative")]
    InvalidNoise,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// A finite shaft ending at `tip`, extending `length` mm along `direction`,
/// in front of the plane `z = background_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    pub tip: Point3,
    /// From the tip into the body of the instrument.
    pub direction: Vector3,
    pub length: f64,
    pub radius: f64,
    pub background_z: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(intrinsics: CameraIntrinsics, tip: Point3, direction: Vector3, length: f64, radius: f64) -> Result<Self> {
        let spec = Self { intrinsics, tip, direction, length, radius, background_z: DEFAULT_BACKGROUND_MM, seed: 0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(SynthError::InvalidScene("length must be positive"));
        }
        if !(self.direction.norm() > 0.0) {
            return Err(SynthError::InvalidScene("direction must be non-zero"));
        }
        if !(self.tip.z > 0.0) {
            return Err(SynthError::InvalidScene("tip must be in front of the camera"));
        }
        let k = &self.intrinsics;
        if k.is_bounded() && !k.contains(k.project(&self.tip)?) {
            return Err(SynthError::InvalidScene("tip projects outside the image"));
        }
        let end = self.end();
        if self.tip.z.max(end.z) + self.radius >= self.background_z {
            return Err(SynthError::InvalidScene("background must lie behind the shaft"));
        }
        self.axis()?;
        Ok(())
    }

    pub fn axis(&self) -> Result<CylinderAxis> {
        Ok(CylinderAxis::through_point(&self.tip, &self.direction, self.radius)?)
    }

    /// The far end of the shaft.
    pub fn end(&self) -> Point3 {
        self.tip + self.direction.normalize() * self.length
    }

    /// Axial extent `[t0, t1]` along the canonical axis direction.
    pub fn extent(&self) -> Result<(f64, f64)> {
        let axis = self.axis()?;
        let a = axis.axial_parameter(&self.tip);
        let b = axis.axial_parameter(&self.end());
        Ok((a.min(b), a.max(b)))
    }

    pub fn pose(&self) -> Result<ToolPose> {
        Ok(ToolPose::new(self.axis()?, self.tip)?)
    }
}

/// Ray-cast depth (mm) and shaft mask. Pixels whose near-surface hit falls
/// outside the shaft extent see the background plane.
pub fn render(spec: &SceneSpec, width: usize, height: usize) -> Result<(DepthMap, ShaftMask)> {
    spec.validate()?;
    let axis = spec.axis()?;
    let (t0, t1) = spec.extent()?;
    let k = &spec.intrinsics;
    let mut depth = vec![spec.background_z; width * height];
    let mut mask = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            let hit = axis.ray_hit(k, Pixel::new(x as f64, y as f64))?;
            if let Some(hit) = hit {
                let t = axis.axial_parameter(&hit.point);
                if (t0..=t1).contains(&t) && hit.point.z < spec.background_z {
                    depth[y * width + x] = hit.point.z;
                    mask[y * width + x] = true;
                }
            }
        }
    }
    if !mask.iter().any(|b| *b) {
        return Err(SynthError::EmptyFrustum);
    }
    Ok((DepthMap::new(width, height, depth, DepthUnit::Millimeters)?, ShaftMask::new(width, height, mask)?))
}

/// Noise levels (standard deviations) and the seed they are drawn with.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub boundary_angle_deg: f64,
    pub boundary_offset_px: f64,
    pub depth_mult_sigma: f64,
    pub tip_px_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.boundary_angle_deg, self.boundary_offset_px, self.depth_mult_sigma, self.tip_px_sigma];
        if all.iter().all(|s| *s >= 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(SynthError::InvalidNoise)
        }
    }
}

/// `(η·gt + γ)·(1 + N(0, σ))`, clamped at zero, drawn from `noise.seed`.
pub fn make_relative(gt: &DepthMap, eta: f64, gamma: f64, noise: &NoiseSpec) -> Result<Clamped<DepthMap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    make_relative_with(gt, eta, gamma, noise, &mut rng)
}

pub fn make_relative_with<R: Rng>(gt: &DepthMap, eta: f64, gamma: f64, noise: &NoiseSpec, rng: &mut R) -> Result<Clamped<DepthMap>> {
    if !(eta.abs() > ETA_TOL) {
        return Err(SynthError::ZeroEta);
    }
    noise.validate()?;
    let sigma = noise.depth_mult_sigma;
    let values = gt
        .values()
        .iter()
        .map(|g| {
            let n: f64 = rng.sample(StandardNormal);
            let d = eta * g + gamma;
            if sigma == 0.0 { d } else { d * (1.0 + sigma * n) }
        })
        .collect();
    Ok(DepthMap::from_clamped(gt.width(), gt.height(), values, DepthUnit::Relative)?)
}

/// Silhouettes and tip of the scene as seen by a perfect detector.
pub fn analytic_observation(spec: &SceneSpec) -> Result<ShaftObservation> {
    let axis = spec.axis()?;
    let k = &spec.intrinsics;
    let (a, b) = axis.silhouette_lines(k)?;
    let tip = k.project(&spec.tip)?;
    let (line_minus, line_plus) = label_lines(a, b, tip);
    Ok(ShaftObservation { line_minus, line_plus, tip, interior: tip, quality: 1.0 })
}

/// Jitters both lines in Hesse form and the tip pixel, drawing from
/// `noise.seed`.
pub fn perturb_observation(obs: &ShaftObservation, noise: &NoiseSpec) -> ShaftObservation {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    perturb_observation_with(obs, noise, &mut rng)
}

/// As [`perturb_observation`] with an external generator. Always consumes six
/// normal draws so streams stay aligned whatever the noise levels.
pub fn perturb_observation_with<R: Rng>(obs: &ShaftObservation, noise: &NoiseSpec, rng: &mut R) -> ShaftObservation {
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let sigma_theta = noise.boundary_angle_deg.to_radians();
    let sigma_rho = noise.boundary_offset_px;
    let mut jitter = |l: &ImageLine| {
        let (dt, dr) = (draw(), draw());
        if sigma_theta == 0.0 && sigma_rho == 0.0 {
            return *l;
        }
        let (theta, rho) = l.hesse();
        ImageLine::from_hesse(theta + sigma_theta * dt, rho + sigma_rho * dr).unwrap_or(*l)
    };
    let line_minus = jitter(&obs.line_minus);
    let line_plus = jitter(&obs.line_plus);
    let (du, dv) = (draw(), draw());
    let tip = Pixel::new(obs.tip.u + noise.tip_px_sigma * du, obs.tip.v + noise.tip_px_sigma * dv);
    ShaftObservation { line_minus, line_plus, tip, ..*obs }
}

/// Random scenes for the Monte-Carlo harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneDistribution {
    pub intrinsics: CameraIntrinsics,
    /// Tip depth range in mm.
    pub depth_range: (f64, f64),
    pub radius: f64,
    pub length: f64,
    pub background_z: f64,
    /// Upper bound on `|ŝ·ẑ|`.
    pub max_axial_cos: f64,
    /// Tip pixels are drawn from the image shrunk by this fraction per side.
    pub tip_margin: f64,
}

impl Default for SceneDistribution {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::new(500.0, 500.0, 320.0, 256.0, 640, 512).expect("valid default intrinsics"),
            depth_range: (20.0, 150.0),
            radius: DEFAULT_RADIUS_MM,
            length: 400.0,
            background_z: 160.0,
            max_axial_cos: 0.95,
            tip_margin: 0.15,
        }
    }
}

const MAX_SCENE_DRAWS: usize = 1000;

impl SceneDistribution {
    /// Draws until the scene is valid and its silhouettes are defined.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<SceneSpec> {
        let k = self.intrinsics;
        let (w, h) = (k.width as f64, k.height as f64);
        for _ in 0..MAX_SCENE_DRAWS {
            let z = rng.random_range(self.depth_range.0..=self.depth_range.1);
            let u = rng.random_range(self.tip_margin * w..=(1.0 - self.tip_margin) * w);
            let v = rng.random_range(self.tip_margin * h..=(1.0 - self.tip_margin) * h);
            let tip = Point3::from(k.ray(Pixel::new(u, v)) * z);
            // uniform on the hemisphere d_z <= 0 (body nearer the camera)
            let dz = -rng.random::<f64>();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            if dz.abs() >= self.max_axial_cos {
                continue;
            }
            let rxy = (1.0 - dz * dz).sqrt();
            let direction = Vector3::new(rxy * phi.cos(), rxy * phi.sin(), dz);
            let spec = SceneSpec {
                intrinsics: k,
                tip,
                direction,
                length: self.length,
                radius: self.radius,
                background_z: self.background_z,
                seed: 0,
            };
            if spec.validate().is_ok() && analytic_observation(&spec).is_ok() {
                return Ok(spec);
            }
        }
        Err(SynthError::InvalidScene("distribution produced no valid scene"))
    }
}

/// Per-trial generator: one counter-based stream per index.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Ok(PoseErrors),
    Rejected(String),
}

/// One pose trial: scene, analytic observation, perturbation, estimate.
pub fn pose_trial(dist: &SceneDistribution, noise: &NoiseSpec, seed: u64, index: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(seed, index);
    let scene = dist.sample(&mut rng)?;
    let truth = scene.pose()?;
    let obs = perturb_observation_with(&analytic_observation(&scene)?, noise, &mut rng);
    Ok(match estimate_pose_with_fallback(&obs, &scene.intrinsics, scene.radius) {
        Ok(est) => TrialOutcome::Ok(pose_errors(&est, &truth)),
        Err(e) => TrialOutcome::Rejected(e.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonteCarloPose {
    pub errors: Vec<PoseErrors>,
    pub rejected: usize,
}

pub fn monte_carlo_pose(trials: usize, dist: &SceneDistribution, noise: &NoiseSpec, seed: u64) -> Result<MonteCarloPose> {
    noise.validate()?;
    let mut out = MonteCarloPose::default();
    for i in 0..trials {
        match pose_trial(dist, noise, seed, i as u64)? {
            TrialOutcome::Ok(e) => out.errors.push(e),
            TrialOutcome::Rejected(_) => out.rejected += 1,
        }
    }
    Ok(out)
}

/// Relative-depth distortion used by the scale harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffineDistortion {
    pub eta: f64,
    pub gamma: f64,
}

impl Default for AffineDistortion {
    fn default() -> Self {
        // a power-of-two gain and no offset make the relative map an exact
        // binary scaling of the ground truth, also after f32 storage
        Self { eta: 0.03125, gamma: 0.0 }
    }
}

/// One scale trial: render, distort, perturb the observation, recover.
/// Returns `median(gt) / median(recovered)` over the frame.
pub fn scale_trial(
    dist: &SceneDistribution,
    affine: &AffineDistortion,
    noise: &NoiseSpec,
    cfg: &RecoveryConfig,
    seed: u64,
    index: u64,
) -> Result<Option<f64>> {
    let mut rng = trial_rng(seed, index);
    let scene = dist.sample(&mut rng)?;
    let k = scene.intrinsics;
    let (gt, mask) = match render(&scene, k.width as usize, k.height as usize) {
        Ok(r) => r,
        Err(SynthError::EmptyFrustum) => return Ok(None),
        Err(e) => return Err(e),
    };
    let rel = make_relative_with(&gt, affine.eta, affine.gamma, noise, &mut rng)?.value;
    let obs = perturb_observation_with(&analytic_observation(&scene)?, noise, &mut rng);
    let Ok(rec) = recover_from_observation(&rel, &mask, &obs, &k, scene.radius, cfg) else {
        return Ok(None);
    };
    Ok(median_scale_factor(&rec.depth.value, &gt, None).ok())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonteCarloScale {
    pub ratios: Vec<f64>,
    pub rejected: usize,
}

pub fn monte_carlo_scale(
    trials: usize,
    dist: &SceneDistribution,
    affine: &AffineDistortion,
    noise: &NoiseSpec,
    cfg: &RecoveryConfig,
    seed: u64,
) -> Result<MonteCarloScale> {
    noise.validate()?;
    let mut out = MonteCarloScale::default();
    for i in 0..trials {
        match scale_trial(dist, affine, noise, cfg, seed, i as u64)? {
            Some(r) => out.ratios.push(r),
            None => out.rejected += 1,
        }
    }
    Ok(out)
}
