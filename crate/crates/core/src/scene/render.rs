//! Point-splat rasterizer. Each scene point covers the pixels whose centers lie
//! within a world-space disk around it (at least a fixed pixel radius, so the
//! containing pixel is always hit); the nearest point wins per pixel.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SyntheticScene;
use crate::camera::{DepthGrid, GrayImage, Intrinsics};
use crate::correlation::FeatureMap;
use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatParams {
    /// Disk radius in meters.
    pub world_radius: f64,
    /// Lower bound on the disk radius in pixels; >= 1/sqrt(2) covers the
    /// containing pixel.
    pub min_pixel_radius: f64,
}

impl Default for SplatParams {
    fn default() -> Self {
        Self {
            world_radius: 0.04,
            min_pixel_radius: 0.75,
        }
    }
}

impl SplatParams {
    /// Lateral radius in meters covered by a point at depth `z`.
    pub fn radius_at(&self, z: f64, k: &Intrinsics) -> f64 {
        self.world_radius.max(self.min_pixel_radius * z / k.fx.min(k.fy))
    }
}

/// Depth plus the index of the scene point seen at every pixel.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub depth: DepthGrid,
    pub point: Vec<Option<u32>>,
}

pub const MIN_RESOLUTION: usize = 8;

pub fn render_view(
    scene: &SyntheticScene,
    pose: &Pose,
    intrinsics: &Intrinsics,
    resolution: usize,
    splat: &SplatParams,
) -> Result<RenderedView> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let k = intrinsics.scaled_to(resolution);
    let mut depth = DepthGrid::invalid(resolution);
    let mut point = vec![None; resolution * resolution];
    let res = resolution as f64;
    for (idx, sp) in scene.points.iter().enumerate() {
        let p = pose.apply(&Vector3::from(sp.position));
        let Some((u, v)) = k.project(&p) else {
            continue;
        };
        let z = p.z;
        let r = splat.radius_at(z, &k);
        // disk in normalized image coordinates
        let (rx, ry) = (r / z * k.fx, r / z * k.fy);
        if u + rx < 0.0 || v + ry < 0.0 || u - rx > res || v - ry > res {
            continue;
        }
        let c0 = (u - rx - 0.5).ceil().max(0.0) as usize;
        let c1 = ((u + rx - 0.5).floor().min(res - 1.0)).max(-1.0);
        let r0 = (v - ry - 0.5).ceil().max(0.0) as usize;
        let r1 = ((v + ry - 0.5).floor().min(res - 1.0)).max(-1.0);
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        let bound = (r / z) * (r / z);
        for row in r0..=r1 as usize {
            let dy = (row as f64 + 0.5 - v) / k.fy;
            for col in c0..=c1 as usize {
                let dx = (col as f64 + 0.5 - u) / k.fx;
                if dx * dx + dy * dy > bound {
                    continue;
                }
                let cur = depth.get(row, col);
                if cur <= 0.0 || z < cur {
                    depth.set(row, col, z);
                    point[row * resolution + col] = Some(idx as u32);
                }
            }
        }
    }
    Ok(RenderedView { depth, point })
}

/// Z-depth raster of the scene; pixels without a point are invalid.
pub fn render_depth(
    scene: &SyntheticScene,
    pose: &Pose,
    intrinsics: &Intrinsics,
    resolution: usize,
) -> Result<DepthGrid> {
    Ok(render_view(scene, pose, intrinsics, resolution, &SplatParams::default())?.depth)
}

/// Grayscale image whose intensity is the surface tag of the visible point,
/// black where nothing is visible.
pub fn render_gray(
    scene: &SyntheticScene,
    pose: &Pose,
    intrinsics: &Intrinsics,
    resolution: usize,
) -> Result<GrayImage> {
    let view = render_view(scene, pose, intrinsics, resolution, &SplatParams::default())?;
    let data = view
        .point
        .iter()
        .map(|p| p.map_or(0.0, |i| scene.points[i as usize].tag as f64 / 255.0))
        .collect();
    GrayImage::new(resolution, resolution, data)
}

/// Deterministic unit embedding of a surface tag.
fn tag_embedding(tag: u32, channels: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A6_0000 ^ tag as u64);
    let v: Vec<f64> = (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

/// Feature map of `side x side` cells: each cell averages the tag embeddings of
/// its visible pixels, rendered at `side * pixels_per_cell`.
pub fn render_features(
    scene: &SyntheticScene,
    pose: &Pose,
    intrinsics: &Intrinsics,
    side: usize,
    channels: usize,
    pixels_per_cell: usize,
) -> Result<FeatureMap> {
    let res = side * pixels_per_cell;
    let view = render_view(scene, pose, intrinsics, res.max(MIN_RESOLUTION), &SplatParams::default())?;
    let res = view.depth.side();
    let cell = res / side;
    if cell * side != res {
        return Err(Error::shape("feature side must divide the render resolution"));
    }
    let embeddings: Vec<Vec<f64>> = (0..256).map(|t| tag_embedding(t, channels)).collect();
    let mut data = vec![0.0; side * side * channels];
    let norm = 1.0 / (cell * cell) as f64;
    for row in 0..res {
        for col in 0..res {
            if let Some(i) = view.point[row * res + col] {
                let e = &embeddings[scene.points[i as usize].tag as usize % 256];
                let dst = ((row / cell) * side + col / cell) * channels;
                for (d, v) in data[dst..dst + channels].iter_mut().zip(e) {
                    *d += v * norm;
                }
            }
        }
    }
    FeatureMap::new(side, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Quaternion;
    use crate::scene::{Bounds, ScenePoint};

    fn scene_of(points: &[[f64; 3]]) -> SyntheticScene {
        SyntheticScene {
            seed: 0,
            bounds: Bounds {
                min: [-10.0; 3],
                max: [10.0; 3],
            },
            points: points
                .iter()
                .map(|p| ScenePoint {
                    position: *p,
                    tag: 7,
                })
                .collect(),
        }
    }

    #[test]
    fn single_point_on_axis() {
        let scene = scene_of(&[[0.0, 0.0, 2.0]]);
        let d = render_depth(&scene, &Pose::identity(), &Intrinsics::default(), 16).unwrap();
        // optical axis hits the corner of the four central pixels
        for (r, c) in [(7, 7), (7, 8), (8, 7), (8, 8)] {
            assert_eq!(d.get(r, c), 2.0);
        }
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn empty_view_all_invalid() {
        let scene = scene_of(&[[0.0, 0.0, -2.0]]);
        let d = render_depth(&scene, &Pose::identity(), &Intrinsics::default(), 16).unwrap();
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn nearer_point_wins() {
        let scene = scene_of(&[[0.0, 0.0, 3.0], [0.0, 0.0, 1.5], [0.0, 0.0, 2.5]]);
        let d = render_depth(&scene, &Pose::identity(), &Intrinsics::default(), 16).unwrap();
        assert_eq!(d.get(8, 8), 1.5);
    }

    #[test]
    fn small_resolution_rejected() {
        let scene = scene_of(&[[0.0, 0.0, 2.0]]);
        assert!(render_depth(&scene, &Pose::identity(), &Intrinsics::default(), 4).is_err());
    }

    #[test]
    fn gray_and_features() {
        let scene = scene_of(&[[0.0, 0.0, 2.0]]);
        let pose = Pose::new(Quaternion::IDENTITY, nalgebra::Vector3::zeros());
        let g = render_gray(&scene, &pose, &Intrinsics::default(), 16).unwrap();
        assert!((g.get(8, 8) - 7.0 / 255.0).abs() < 1e-15);
        let f = render_features(&scene, &pose, &Intrinsics::default(), 4, 8, 4).unwrap();
        assert_eq!((f.side(), f.channels()), (4, 8));
        assert!(f.at(0, 0).iter().all(|v| *v == 0.0));
        assert!(f.at(2, 2).iter().any(|v| *v != 0.0));
    }
}
