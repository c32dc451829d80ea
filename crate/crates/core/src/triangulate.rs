//! Absolute pose from pairwise relative estimates.
//!
//! Every pair of references yields a hypothesis: the query center is the
//! midpoint of the two reference rays and the rotation is the average of the
//! two implied query rotations. Hypotheses are scored by counting references
//! whose ray points at the hypothesized center (angle test) and whose predicted
//! baseline agrees with the hypothesized one (scale-ratio test).

use std::cmp::Ordering;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::parallel;
use crate::pose::{average_rotation, Pose, Quaternion, RelativePoseEstimate};

/// Half-line from a reference camera center toward the predicted query center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, lambda: f64) -> Vector3<f64> {
        self.origin + lambda * self.direction
    }
}

/// World-frame ray of an estimate. The estimate's direction already points
/// from the reference toward the query, so this is `c_i + lambda * R_i^T t`.
pub fn ray_from_estimate(reference: &Pose, est: &RelativePoseEstimate) -> Ray {
    Ray::new(
        reference.camera_center(),
        reference.rotation.conjugate().rotate(&est.direction),
    )
}

const PARALLEL_EPS: f64 = 1e-6;

/// Midpoint of the common perpendicular of two rays.
///
/// Fails with `DegenerateRays` for near-parallel rays and with `NegativeRange`
/// if the closest point lies behind either origin.
pub fn triangulate_rays(a: &Ray, b: &Ray) -> Result<Vector3<f64>> {
    let cross = a.direction.cross(&b.direction).norm();
    if cross <= PARALLEL_EPS {
        return Err(Error::DegenerateRays);
    }
    let w0 = a.origin - b.origin;
    let cos = a.direction.dot(&b.direction);
    let d = a.direction.dot(&w0);
    let e = b.direction.dot(&w0);
    let denom = cross * cross;
    let la = (cos * e - d) / denom;
    let lb = (e - cos * d) / denom;
    if la < 0.0 || lb < 0.0 {
        return Err(Error::NegativeRange);
    }
    Ok(0.5 * (a.at(la) + b.at(lb)))
}

/// Candidate query pose generated by references `pair.0` and `pair.1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub pose: Pose,
    pub pair: (usize, usize),
    pub inliers: usize,
    pub mean_uncertainty: f64,
}

impl Hypothesis {
    pub fn center(&self) -> Vector3<f64> {
        self.pose.camera_center()
    }
}

/// Query rotation implied by one estimate: `R_{i->q} R_i`.
fn implied_rotation(reference: &Pose, est: &RelativePoseEstimate) -> Quaternion {
    est.rotation.conjugate() * reference.rotation
}

/// Builds the hypothesis of one reference pair. `pair` is left as `(0, 1)` and
/// `inliers` as zero; [`ransac_absolute_pose`] fills both.
pub fn make_hypothesis(
    ref_i: &Pose,
    est_i: &RelativePoseEstimate,
    ref_j: &Pose,
    est_j: &RelativePoseEstimate,
) -> Result<Hypothesis> {
    let center = triangulate_rays(
        &ray_from_estimate(ref_i, est_i),
        &ray_from_estimate(ref_j, est_j),
    )?;
    let rotation = average_rotation(
        &implied_rotation(ref_i, est_i),
        &implied_rotation(ref_j, est_j),
    )?;
    Ok(Hypothesis {
        pose: Pose::from_center(rotation, &center),
        pair: (0, 1),
        inliers: 0,
        mean_uncertainty: 0.5 * (est_i.uncertainty + est_j.uncertainty),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Angle threshold in degrees.
    pub alpha_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Apply the scale-ratio test in addition to the angle test.
    pub scale_test: bool,
    /// Break inlier-count ties by mean uncertainty before pair order.
    pub uncertainty_tiebreak: bool,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            alpha_max: 15.0,
            s_min: 0.5,
            s_max: 2.0,
            scale_test: true,
            uncertainty_tiebreak: true,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_max > 0.0 && self.alpha_max < 90.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha_max must lie in (0, 90), got {}",
                self.alpha_max
            )));
        }
        if !(self.s_min > 0.0 && self.s_min < 1.0 && self.s_max > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < s_min < 1 < s_max, got {} and {}",
                self.s_min, self.s_max
            )));
        }
        Ok(())
    }
}

/// Angle in degrees between two vectors.
fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

const ZERO_BASELINE: f64 = 1e-12;

/// Whether reference `k` supports hypothesis `h`.
///
/// A reference coincident with the hypothesized center passes the angle test
/// but fails the scale test (ratio zero).
pub fn is_inlier(
    h: &Hypothesis,
    ref_k: &Pose,
    est_k: &RelativePoseEstimate,
    p: &RansacParams,
) -> bool {
    let ray = ray_from_estimate(ref_k, est_k);
    let to_h = h.center() - ray.origin;
    let baseline = to_h.norm();
    if baseline >= ZERO_BASELINE && angle_deg(&ray.direction, &to_h) >= p.alpha_max {
        return false;
    }
    if !p.scale_test {
        return true;
    }
    if !(est_k.scale > 0.0) {
        return false;
    }
    let ratio = if baseline < ZERO_BASELINE {
        0.0
    } else {
        baseline / est_k.scale
    };
    p.s_min < ratio && ratio < p.s_max
}

/// Result of one reference pair.
#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Scored(Hypothesis),
    Discarded { pair: (usize, usize), reason: String },
}

impl PairOutcome {
    pub fn pair(&self) -> (usize, usize) {
        match self {
            PairOutcome::Scored(h) => h.pair,
            PairOutcome::Discarded { pair, .. } => *pair,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacDiagnostics {
    /// One outcome per unordered pair, lexicographic order.
    pub outcomes: Vec<PairOutcome>,
    pub chosen: Hypothesis,
}

/// `Less` when `a` should be preferred over `b`.
fn preference(a: &Hypothesis, b: &Hypothesis, p: &RansacParams) -> Ordering {
    b.inliers
        .cmp(&a.inliers)
        .then_with(|| {
            if p.uncertainty_tiebreak {
                a.mean_uncertainty.total_cmp(&b.mean_uncertainty)
            } else {
                Ordering::Equal
            }
        })
        .then_with(|| a.pair.cmp(&b.pair))
}

/// Exhaustive RANSAC over all unordered reference pairs.
///
/// Inliers are counted over every reference, the generating pair included.
/// The hypothesis with most inliers wins; ties go to the smaller mean
/// uncertainty (if enabled), then to the lexicographically smaller pair.
pub fn ransac_absolute_pose(
    refs: &[(Pose, RelativePoseEstimate)],
    p: &RansacParams,
) -> Result<(Pose, RansacDiagnostics)> {
    if refs.len() < 2 {
        return Err(Error::NotEnoughReferences(refs.len()));
    }
    let pairs: Vec<(usize, usize)> = (0..refs.len())
        .flat_map(|i| (i + 1..refs.len()).map(move |j| (i, j)))
        .collect();
    let outcomes = parallel::map(&pairs, |&(i, j)| {
        let (ref_i, est_i) = &refs[i];
        let (ref_j, est_j) = &refs[j];
        match make_hypothesis(ref_i, est_i, ref_j, est_j) {
            Ok(mut h) => {
                h.pair = (i, j);
                h.inliers = refs
                    .iter()
                    .filter(|(r, e)| is_inlier(&h, r, e, p))
                    .count();
                PairOutcome::Scored(h)
            }
            Err(e) => PairOutcome::Discarded {
                pair: (i, j),
                reason: e.to_string(),
            },
        }
    });
    let chosen = outcomes
        .iter()
        .filter_map(|o| match o {
            PairOutcome::Scored(h) => Some(*h),
            PairOutcome::Discarded { .. } => None,
        })
        .min_by(|a, b| preference(a, b, p))
        .ok_or(Error::AllHypothesesDegenerate)?;
    Ok((chosen.pose, RansacDiagnostics { outcomes, chosen }))
}

/// Collapses stochastic forward samples into one estimate.
///
/// Direction and rotation are normalized means (quaternions sign-aligned first),
/// scale is the mean scale, and uncertainty is the trace of the unbiased sample
/// covariance of the implied offsets `scale * direction`.
pub fn aggregate_mc_samples(samples: &[RelativePoseEstimate]) -> Result<RelativePoseEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let dir_sum: Vector3<f64> = samples.iter().map(|s| s.direction).sum();
    if dir_sum.norm() / n < 1e-9 {
        return Err(Error::DegenerateMean);
    }
    // align to the sample closest to the identity-sign hemisphere; independent of order
    let pivot = samples
        .iter()
        .map(|s| s.rotation)
        .max_by(|a, b| {
            a.w.total_cmp(&b.w)
                .then_with(|| a.x.total_cmp(&b.x))
                .then_with(|| a.y.total_cmp(&b.y))
                .then_with(|| a.z.total_cmp(&b.z))
        })
        .unwrap_or_default();
    let q_sum = samples
        .iter()
        .fold(nalgebra::Vector4::zeros(), |acc, s| acc + pivot.aligned(&s.rotation));
    let rotation = Quaternion::from_vector(&q_sum).map_err(|_| Error::DegenerateMean)?;

    let offsets: Vec<Vector3<f64>> = samples.iter().map(|s| s.offset()).collect();
    let mean_offset: Vector3<f64> = offsets.iter().sum::<Vector3<f64>>() / n;
    let spread: f64 = offsets
        .iter()
        .map(|o| (o - mean_offset).norm_squared())
        .sum::<f64>()
        / (n - 1.0);

    Ok(RelativePoseEstimate {
        direction: dir_sum.normalize(),
        rotation,
        scale: samples.iter().map(|s| s.scale).sum::<f64>() / n,
        uncertainty: spread,
    })
}
