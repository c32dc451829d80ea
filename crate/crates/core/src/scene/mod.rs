//! Synthetic indoor scenes, camera sampling and the noise-model regressor that
//! stands in for a learned relative pose network.

mod pairs;
mod regressor;
mod render;

pub use pairs::{
    overlap_factor, overlap_from_coordinates, overlaps_for_pairs, sample_training_pairs, scene_coordinates,
    PairConstraints, PairSampling,
};
pub use regressor::{oracle_regressor, NoiseModel};
pub use render::{render_depth, render_features, render_gray, render_view, RenderedView, SplatParams};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::pose::{Pose, Quaternion};

/// Axis-aligned box, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.min).lerp(&Vector3::from(self.max), 0.5)
    }

    pub fn extent(&self) -> Vector3<f64> {
        Vector3::from(self.max) - Vector3::from(self.min)
    }

    /// Box shrunk by `margin` on every side.
    pub fn shrunk(&self, margin: f64) -> Bounds {
        Bounds {
            min: self.min.map(|v| v + margin),
            max: self.max.map(|v| v - margin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub position: [f64; 3],
    /// Surface texture id; drives rendered intensity and features.
    pub tag: u32,
}

/// Room-like point cloud: textured walls, floor and ceiling plus box-shaped
/// furniture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub seed: u64,
    pub bounds: Bounds,
    pub points: Vec<ScenePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub bounds: Bounds,
    /// Distance between neighbouring surface samples, meters.
    pub spacing: f64,
    /// Edge length of a uniformly textured surface patch, meters.
    pub patch: f64,
    pub furniture: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            bounds: Bounds {
                min: [0.0, 0.0, 0.0],
                max: [3.0, 3.0, 2.5],
            },
            spacing: 0.05,
            patch: 0.2,
            furniture: 4,
        }
    }
}

impl SyntheticScene {
    pub fn generate(seed: u64, cfg: &SceneConfig) -> Result<Self> {
        let ext = cfg.bounds.extent();
        if ext.iter().any(|e| !(*e > 0.0)) || !(cfg.spacing > 0.0) || !(cfg.patch > 0.0) {
            return Err(Error::InvalidArgument("scene needs positive extent, spacing and patch".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        let lo = Vector3::from(cfg.bounds.min);
        let hi = Vector3::from(cfg.bounds.max);
        sample_box_surface(&mut rng, &lo, &hi, cfg, &mut points);
        for _ in 0..cfg.furniture {
            let size = Vector3::new(
                rng.random_range(0.3..0.8),
                rng.random_range(0.3..0.8),
                rng.random_range(0.3..1.0),
            );
            let min = Vector3::new(
                rng.random_range(lo.x..(hi.x - size.x).max(lo.x + 1e-6)),
                rng.random_range(lo.y..(hi.y - size.y).max(lo.y + 1e-6)),
                lo.z,
            );
            let max = (min + size).zip_map(&hi, f64::min);
            sample_box_surface(&mut rng, &min, &max, cfg, &mut points);
        }
        let points: Vec<_> = points.into_iter().filter(|p| cfg.bounds.contains(&Vector3::from(p.position))).collect();
        if points.is_empty() {
            return Err(Error::EmptyScene);
        }
        Ok(Self {
            seed,
            bounds: cfg.bounds,
            points,
        })
    }

    pub fn positions(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.points.iter().map(|p| Vector3::from(p.position))
    }

    /// Whether any scene point projects into the image of `pose`.
    pub fn is_visible_from(&self, pose: &Pose, intrinsics: &Intrinsics) -> bool {
        self.positions().any(|p| {
            intrinsics
                .project(&pose.apply(&p))
                .and_then(|(u, v)| intrinsics.pixel_of(u, v))
                .is_some()
        })
    }
}

/// Jittered grid samples on the six faces of a box, one random tag per patch.
fn sample_box_surface(
    rng: &mut ChaCha8Rng,
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
    cfg: &SceneConfig,
    out: &mut Vec<ScenePoint>,
) {
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [lo[axis], hi[axis]] {
            let na = ((hi[a] - lo[a]) / cfg.spacing).ceil().max(1.0) as usize;
            let nb = ((hi[b] - lo[b]) / cfg.spacing).ceil().max(1.0) as usize;
            let pa = ((hi[a] - lo[a]) / cfg.patch).ceil().max(1.0) as usize;
            let pb = ((hi[b] - lo[b]) / cfg.patch).ceil().max(1.0) as usize;
            let tags: Vec<u32> = (0..pa * pb).map(|_| rng.random_range(0..256)).collect();
            let (sa, sb) = ((hi[a] - lo[a]) / na as f64, (hi[b] - lo[b]) / nb as f64);
            for i in 0..na {
                for j in 0..nb {
                    let mut p = Vector3::zeros();
                    p[axis] = side;
                    p[a] = lo[a] + (i as f64 + rng.random_range(0.1..0.9)) * sa;
                    p[b] = lo[b] + (j as f64 + rng.random_range(0.1..0.9)) * sb;
                    let ti = (((p[a] - lo[a]) / cfg.patch) as usize).min(pa - 1);
                    let tj = (((p[b] - lo[b]) / cfg.patch) as usize).min(pb - 1);
                    out.push(ScenePoint {
                        position: p.into(),
                        tag: tags[ti * pb + tj],
                    });
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Uniform position and uniform 3D rotation.
    Dense,
    /// Uniform x, y at fixed height with uniform yaw.
    Sparse,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SamplingMode::Dense),
            "sparse" => Ok(SamplingMode::Sparse),
            other => Err(Error::InvalidArgument(format!("unknown sampling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSampling {
    pub mode: SamplingMode,
    /// Keep camera centers this far inside the scene bounds, meters.
    pub margin: f64,
    /// Camera height for sparse sampling; defaults to mid-height.
    pub height: Option<f64>,
    /// Standard deviation of pitch and roll added in sparse mode, degrees.
    pub tilt_jitter_deg: f64,
}

impl PoseSampling {
    pub fn new(mode: SamplingMode) -> Self {
        Self {
            mode,
            margin: 0.3,
            height: None,
            tilt_jitter_deg: 0.0,
        }
    }
}

/// World-to-camera rotation of a camera looking along `forward` with image
/// rows pointing along world -z (for level cameras).
pub fn look_rotation(forward: &Vector3<f64>, up: &Vector3<f64>) -> Quaternion {
    let z = forward.normalize();
    let x = (-up).cross(&z).normalize();
    let y = z.cross(&x);
    // camera-to-world has columns (x, y, z); world-to-camera is its transpose
    let r_cw = nalgebra::Matrix3::from_columns(&[x, y, z]);
    Quaternion::from_rotation_matrix(&r_cw.transpose())
}

/// Level camera with the given yaw (radians from +x toward +y).
pub fn yaw_rotation(yaw: f64) -> Quaternion {
    look_rotation(&Vector3::new(yaw.cos(), yaw.sin(), 0.0), &Vector3::z())
}

/// Samples `n` camera poses that each see at least one scene point.
pub fn sample_poses(
    scene: &SyntheticScene,
    intrinsics: &Intrinsics,
    n: usize,
    sampling: &PoseSampling,
    seed: u64,
) -> Result<Vec<Pose>> {
    if scene.points.is_empty() {
        return Err(Error::EmptyScene);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let inner = scene.bounds.shrunk(sampling.margin);
    if (0..3).any(|k| inner.min[k] > inner.max[k]) {
        return Err(Error::InvalidArgument("margin exceeds scene bounds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 1000 {
            return Err(Error::EmptyScene);
        }
        let mut uniform = |k: usize| {
            if inner.min[k] == inner.max[k] {
                inner.min[k]
            } else {
                rng.random_range(inner.min[k]..=inner.max[k])
            }
        };
        let pose = match sampling.mode {
            SamplingMode::Dense => {
                let c = Vector3::new(uniform(0), uniform(1), uniform(2));
                let q = Quaternion::try_new(
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                )?;
                Pose::from_center(q, &c)
            }
            SamplingMode::Sparse => {
                let (x, y) = (uniform(0), uniform(1));
                let z = sampling.height.unwrap_or_else(|| scene.bounds.center().z);
                let yaw = rng.random_range(0.0..std::f64::consts::TAU);
                let mut q = yaw_rotation(yaw);
                if sampling.tilt_jitter_deg > 0.0 {
                    let sigma = sampling.tilt_jitter_deg.to_radians();
                    let pitch: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                    let roll: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                    // camera-frame tilt: pitch about x, roll about the optical axis
                    let tilt = Quaternion::from_axis_angle(&Vector3::z(), roll)
                        * Quaternion::from_axis_angle(&Vector3::x(), pitch);
                    q = tilt * q;
                }
                Pose::from_center(q, &Vector3::new(x, y, z))
            }
        };
        if scene.is_visible_from(&pose, intrinsics) {
            out.push(pose);
        }
    }
    Ok(out)
}

/// Camera path of `n` poses, like a handheld scan: each pose moves up to
/// `step` meters from the previous one and turns by a Gaussian angle of
/// `turn_deg` about a random axis. Steps that leave the margin-shrunk bounds or
/// see nothing are redrawn.
pub fn sample_trajectory(
    scene: &SyntheticScene,
    intrinsics: &Intrinsics,
    n: usize,
    step: f64,
    turn_deg: f64,
    seed: u64,
) -> Result<Vec<Pose>> {
    let margin = PoseSampling::new(SamplingMode::Dense).margin;
    let inner = scene.bounds.shrunk(margin);
    let first = sample_poses(scene, intrinsics, 1, &PoseSampling::new(SamplingMode::Dense), seed)?[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7452_414A);
    let turn = turn_deg.to_radians();
    let mut out = vec![first];
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n {
            return Err(Error::EmptyScene);
        }
        let prev = out[out.len() - 1];
        let dir = loop {
            let v = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            if v.norm() > 1e-9 {
                break v.normalize();
            }
        };
        let c = prev.camera_center() + dir * rng.random_range(0.0..=step);
        if !inner.contains(&c) {
            continue;
        }
        let axis = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let angle = rng.sample::<f64, _>(StandardNormal) * turn;
        let q = if axis.norm() > 1e-9 {
            Quaternion::from_axis_angle(&axis, angle) * prev.rotation
        } else {
            prev.rotation
        };
        let pose = Pose::from_center(q, &c);
        if scene.is_visible_from(&pose, intrinsics) {
            out.push(pose);
        }
    }
    Ok(out)
}
