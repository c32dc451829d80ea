//! Noise-model stand-in for a relative pose network with MC-dropout sampling.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pose::{ground_truth_targets, relative_pose, Pose, PoseTargets, Quaternion, RelativePoseEstimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the direction perturbation angle, degrees.
    pub dir_sigma_deg: f64,
    /// Standard deviation of the axis-angle rotation noise, degrees.
    pub rot_sigma_deg: f64,
    /// Standard deviation of the log-scale noise.
    pub scale_rel_sigma: f64,
    pub outlier_prob: f64,
    /// Draw outliers per sample instead of once per pair.
    pub outlier_per_sample: bool,
    /// Log-normal spread of a per-pair multiplier applied to all three sigmas.
    /// Zero gives every pair the same noise level.
    pub sigma_spread: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            dir_sigma_deg: 0.0,
            rot_sigma_deg: 0.0,
            scale_rel_sigma: 0.0,
            outlier_prob: 0.0,
            outlier_per_sample: false,
            sigma_spread: 0.0,
            mc_samples: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.dir_sigma_deg, self.rot_sigma_deg, self.scale_rel_sigma, self.sigma_spread];
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("noise sigmas must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(Error::InvalidArgument("outlier_prob must lie in [0, 1]".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidArgument("mc_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-pair random stream derived from the model seed and both image ids.
fn pair_rng(seed: u64, ref_id: &str, query_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((ref_id.len() as u64).to_le_bytes());
    h.update(ref_id.as_bytes());
    h.update(query_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn uniform_rotation(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        if let Ok(q) = Quaternion::try_new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ) {
            return q;
        }
    }
}

/// Rotates `dir` by a Gaussian angle about a uniformly random perpendicular axis.
fn perturb_direction(rng: &mut ChaCha8Rng, dir: &Vector3<f64>, sigma: f64) -> Vector3<f64> {
    if sigma == 0.0 {
        return *dir;
    }
    let axis = loop {
        let a = unit_vector(rng).cross(dir);
        if a.norm() > 1e-6 {
            break a.normalize();
        }
    };
    let angle = Normal::new(0.0, sigma).expect("sigma >= 0").sample(rng);
    Quaternion::from_axis_angle(&axis, angle).rotate(dir).normalize()
}

fn perturb_rotation(rng: &mut ChaCha8Rng, q: &Quaternion, sigma: f64) -> Quaternion {
    if sigma == 0.0 {
        return *q;
    }
    let angle = Normal::new(0.0, sigma).expect("sigma >= 0").sample(rng);
    Quaternion::from_axis_angle(&unit_vector(rng), angle) * *q
}

fn outlier_draw(rng: &mut ChaCha8Rng) -> PoseTargets {
    PoseTargets {
        direction: unit_vector(rng),
        rotation: uniform_rotation(rng),
        scale: rng.random_range(0.1..4.0),
    }
}

/// Stochastic relative pose estimates for one reference/query pair.
///
/// Every sample is the ground truth target perturbed by the noise model. An
/// outlier pair (decided once per pair unless `outlier_per_sample`) replaces
/// the ground truth by a random draw before the per-sample noise. Output is a
/// deterministic function of the seed and the two image ids.
pub fn oracle_regressor(
    reference: &Pose,
    query: &Pose,
    ids: (&str, &str),
    nm: &NoiseModel,
) -> Result<Vec<RelativePoseEstimate>> {
    nm.validate()?;
    let truth = ground_truth_targets(&relative_pose(reference, query))?;
    let mut rng = pair_rng(nm.seed, ids.0, ids.1);
    let pair_outlier = !nm.outlier_per_sample && rng.random_bool(nm.outlier_prob);
    let shared = if pair_outlier { Some(outlier_draw(&mut rng)) } else { None };
    let level = if nm.sigma_spread > 0.0 {
        (nm.sigma_spread * rng.sample::<f64, _>(StandardNormal)).exp()
    } else {
        1.0
    };
    let dir_sigma = level * nm.dir_sigma_deg.to_radians();
    let rot_sigma = level * nm.rot_sigma_deg.to_radians();
    let scale_noise = Normal::new(0.0, level * nm.scale_rel_sigma).expect("sigma >= 0");
    let samples = (0..nm.mc_samples)
        .map(|_| {
            let base = match shared {
                Some(o) => o,
                None if nm.outlier_per_sample && rng.random_bool(nm.outlier_prob) => outlier_draw(&mut rng),
                None => truth,
            };
            let direction = perturb_direction(&mut rng, &base.direction, dir_sigma);
            let rotation = perturb_rotation(&mut rng, &base.rotation, rot_sigma);
            let scale = if nm.scale_rel_sigma == 0.0 {
                base.scale
            } else {
                base.scale * scale_noise.sample(&mut rng).exp()
            };
            RelativePoseEstimate {
                direction,
                rotation,
                scale,
                uncertainty: 0.0,
            }
        })
        .collect();
    Ok(samples)
}
