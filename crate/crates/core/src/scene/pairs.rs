//! Overlap between views and constrained training-pair sampling.

use std::collections::{HashMap, HashSet};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::render::render_depth;
use super::SyntheticScene;
use crate::camera::{DepthGrid, Intrinsics};
use crate::error::{Error, Result};
use crate::parallel;
use crate::pose::{rotation_angle, Pose};

/// World coordinates of every valid depth pixel.
pub fn scene_coordinates(depth: &DepthGrid, pose: &Pose, intrinsics: &Intrinsics) -> Vec<Vector3<f64>> {
    let k = intrinsics.scaled_to(depth.side());
    let to_world = pose.inverse();
    let mut out = Vec::with_capacity(depth.valid_count());
    for row in 0..depth.side() {
        for col in 0..depth.side() {
            if let Some(z) = depth.valid(row, col) {
                out.push(to_world.apply(&k.backproject(row, col, z)));
            }
        }
    }
    out
}

/// Uniform hash grid with cells of edge `cell`.
struct PointGrid<'a> {
    cell: f64,
    points: &'a [Vector3<f64>],
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Vector3<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            cell,
            points,
            buckets,
        }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    fn has_within(&self, p: &Vector3<f64>, radius_sq: f64) -> bool {
        let [kx, ky, kz] = Self::key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.buckets.get(&[kx + dx, ky + dy, kz + dz]) {
                        if bucket
                            .iter()
                            .any(|j| (self.points[*j] - p).norm_squared() <= radius_sq)
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Symmetric overlap of two scene-coordinate sets: the mean of the fractions of
/// each set lying within `p_max` of some point of the other.
pub fn overlap_from_coordinates(a: &[Vector3<f64>], b: &[Vector3<f64>], p_max: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::NoValidDepth);
    }
    let r2 = p_max * p_max;
    let directed = |from: &[Vector3<f64>], to: &[Vector3<f64>]| {
        let grid = PointGrid::new(to, p_max);
        let hits = from.iter().filter(|p| grid.has_within(p, r2)).count();
        hits as f64 / from.len() as f64
    };
    Ok(0.5 * (directed(a, b) + directed(b, a)))
}

/// Overlap factor of two views rendered at `resolution`.
pub fn overlap_factor(
    scene: &SyntheticScene,
    pose_i: &Pose,
    pose_j: &Pose,
    intrinsics: &Intrinsics,
    resolution: usize,
    p_max: f64,
) -> Result<f64> {
    let ci = scene_coordinates(&render_depth(scene, pose_i, intrinsics, resolution)?, pose_i, intrinsics);
    let cj = scene_coordinates(&render_depth(scene, pose_j, intrinsics, resolution)?, pose_j, intrinsics);
    overlap_from_coordinates(&ci, &cj, p_max)
}

/// Acceptance thresholds for a training pair. `None` disables a test; an
/// `overlap_min` of zero disables the overlap test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConstraints {
    pub overlap_min: f64,
    /// Maximum camera-center distance, meters.
    pub d_max: Option<f64>,
    /// Maximum rotation difference, degrees.
    pub gamma_max: Option<f64>,
    /// Scene-coordinate match radius used by the overlap factor, meters.
    pub p_max: f64,
}

impl PairConstraints {
    pub fn dense() -> Self {
        Self {
            overlap_min: 0.30,
            d_max: Some(0.6),
            gamma_max: Some(30.0),
            p_max: 0.2,
        }
    }

    pub fn sparse() -> Self {
        Self {
            overlap_min: 0.10,
            d_max: None,
            gamma_max: None,
            p_max: 0.2,
        }
    }

    pub fn unconstrained() -> Self {
        Self {
            overlap_min: 0.0,
            d_max: None,
            gamma_max: None,
            p_max: 0.2,
        }
    }

    /// Tests that need no rendering.
    pub fn accepts_geometry(&self, a: &Pose, b: &Pose) -> bool {
        if let Some(d) = self.d_max {
            if (a.camera_center() - b.camera_center()).norm() >= d {
                return false;
            }
        }
        if let Some(g) = self.gamma_max {
            if rotation_angle(&a.rotation, &b.rotation) >= g {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSampling {
    pub constraints: PairConstraints,
    pub intrinsics: Intrinsics,
    /// Depth resolution used for the overlap factor.
    pub resolution: usize,
    pub max_attempts: usize,
    pub seed: u64,
}

impl PairSampling {
    pub fn new(constraints: PairConstraints, seed: u64) -> Self {
        Self {
            constraints,
            intrinsics: Intrinsics::default(),
            resolution: 32,
            max_attempts: 10_000_000,
            seed,
        }
    }
}

/// Rejection-samples `m` distinct unordered pose pairs `(i, j)`, `i < j`,
/// satisfying every active constraint. Cheap geometric tests run before the
/// overlap test; scene coordinates are rendered once per pose.
pub fn sample_training_pairs(
    scene: &SyntheticScene,
    poses: &[Pose],
    sampling: &PairSampling,
    m: usize,
) -> Result<Vec<(usize, usize)>> {
    if poses.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two poses, got {}",
            poses.len()
        )));
    }
    let c = &sampling.constraints;
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut coords: HashMap<usize, Vec<Vector3<f64>>> = HashMap::new();
    let mut decided: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Vec::with_capacity(m);
    let mut attempts = 0;
    while out.len() < m {
        if attempts >= sampling.max_attempts {
            return Err(Error::BudgetExhausted {
                requested: m,
                partial: out,
            });
        }
        attempts += 1;
        let i = rng.random_range(0..poses.len());
        let j = rng.random_range(0..poses.len());
        if i == j {
            continue;
        }
        let pair = (i.min(j), i.max(j));
        if decided.contains(&pair) || !c.accepts_geometry(&poses[pair.0], &poses[pair.1]) {
            continue;
        }
        decided.insert(pair);
        if c.overlap_min > 0.0 {
            for k in [pair.0, pair.1] {
                if let std::collections::hash_map::Entry::Vacant(slot) = coords.entry(k) {
                    let depth = render_depth(scene, &poses[k], &sampling.intrinsics, sampling.resolution)?;
                    slot.insert(scene_coordinates(&depth, &poses[k], &sampling.intrinsics));
                }
            }
            match overlap_from_coordinates(&coords[&pair.0], &coords[&pair.1], c.p_max) {
                Ok(o) if o > c.overlap_min => {}
                Ok(_) | Err(Error::NoValidDepth) => continue,
                Err(e) => return Err(e),
            }
        }
        out.push(pair);
    }
    Ok(out)
}

/// Overlap of many pairs at once; used by evaluation tooling.
pub fn overlaps_for_pairs(
    scene: &SyntheticScene,
    poses: &[Pose],
    pairs: &[(usize, usize)],
    intrinsics: &Intrinsics,
    resolution: usize,
    p_max: f64,
) -> Vec<Result<f64>> {
    parallel::map(pairs, |(i, j)| {
        overlap_factor(scene, &poses[*i], &poses[*j], intrinsics, resolution, p_max)
    })
}
